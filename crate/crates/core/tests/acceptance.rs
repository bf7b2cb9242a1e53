//! One pass/fail line per acceptance criterion.

mod common;

fn main() {
    let mut failed = 0;
    for (i, (name, f)) in common::CRITERIA.iter().enumerate() {
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match r {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
