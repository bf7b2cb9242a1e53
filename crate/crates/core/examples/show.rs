//! Prints the transformed program, type diagnostics and differential results
//! for one MiniC file under the standard fault schedules.

use streamlift::pipeline::{run, Options};
use streamlift::support::reason_histogram;
use streamlift::transform::print::print_program;
use streamlift::validator::{check, differential, standard_schedules, VfsSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().expect("usage: show FILE.mc [FILE.vfs.json]");
    let src = std::fs::read_to_string(&path).expect("readable source");
    let mut spec: VfsSpec = match args.next() {
        Some(v) => serde_json::from_str(&std::fs::read_to_string(v).expect("readable vfs")).expect("valid vfs"),
        None => VfsSpec::default(),
    };
    if spec.schedules.is_empty() {
        spec.schedules = standard_schedules();
    }
    let (a, out) = match run(&src, &Options::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    print!("{}", print_program(&out.program));
    println!("{:?}", out.report);
    for (r, c) in reason_histogram(&a.ir, &a.verdict) {
        if c.affected > 0 {
            println!("reason: {} affected {} unique {}", r.name(), c.affected, c.unique);
        }
    }
    for d in check(&out.program) {
        println!("type: {d}");
    }
    for state in spec.states() {
        let r = differential(&a.prog, &a.st, &out.program, &state);
        match r.difference() {
            None => println!("same: {:?} exit {:?} {}", state.faults, r.source.exit, r.source.trap.as_deref().unwrap_or("")),
            Some(d) => println!(
                "DIFF: {:?}: {d}\n--- source {:?}\n{}--- target {:?}\n{}",
                state.faults,
                r.source.trap,
                r.source.dump(),
                r.target.trap,
                r.target.dump()
            ),
        }
    }
}
