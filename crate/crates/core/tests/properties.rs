mod common;

use common::{alpha_equal, oracles};
use proptest::prelude::*;
use streamlift::loc::FuncId;
use streamlift::sets::{Capability, Origin};
use streamlift::streamsets::solve;
use streamlift::transform::types::decide_shape;
use streamlift::{CapSet, Constraint, Location, OriginSet};

const ORIGINS: [Origin; 5] = [Origin::Stdin, Origin::Stdout, Origin::Stderr, Origin::File, Origin::Pipe];
const CAPS: [Capability; 5] =
    [Capability::Read, Capability::BufRead, Capability::Write, Capability::Seek, Capability::Close];

fn location() -> impl Strategy<Value = Location> {
    prop_oneof![
        (0u32..4).prop_map(Location::Global),
        (0u32..3, 0u32..6).prop_map(|(f, i)| Location::Local(FuncId(f), i)),
        (0u32..3).prop_map(|f| Location::Ret(FuncId(f))),
    ]
}

fn constraint() -> impl Strategy<Value = Constraint> {
    prop_oneof![
        (location(), 0usize..5).prop_map(|(l, o)| Constraint::Member(l, ORIGINS[o])),
        (location(), 0usize..5).prop_map(|(l, c)| Constraint::Require(l, CAPS[c])),
        (location(), location()).prop_map(|(from, to)| Constraint::OriginFlow { from, to }),
        (location(), location()).prop_map(|(from, to)| Constraint::CapFlow { from, to }),
    ]
}

proptest! {
    #[test]
    fn solver_matches_kleene_iteration(cs in prop::collection::vec(constraint(), 0..80)) {
        prop_assert_eq!(solve(&cs).normalized(), oracles::naive_solve(&cs));
    }

    #[test]
    fn solver_ignores_constraint_order(mut cs in prop::collection::vec(constraint(), 0..60)) {
        let a = solve(&cs).normalized();
        cs.reverse();
        prop_assert_eq!(a, solve(&cs).normalized());
    }

    #[test]
    fn type_decision_matches_table(ob in 0u32..32, cb in 0u32..32, is_param: bool) {
        let origins = OriginSet::of(&ORIGINS.iter().enumerate().filter(|(i, _)| ob >> i & 1 == 1).map(|(_, o)| *o).collect::<Vec<_>>());
        let caps = CapSet::of(&CAPS.iter().enumerate().filter(|(i, _)| cb >> i & 1 == 1).map(|(_, c)| *c).collect::<Vec<_>>());
        prop_assert_eq!(decide_shape(origins, caps, is_param), oracles::decision_table(origins, caps, is_param));
    }
}

#[test]
fn alpha_equivalence_renames_only_fresh_binders() {
    let source = "int main() { FILE *f; return 0; }";
    let a = "fn main() { let mut e = 0; let f = 1; e = f; }";
    let b = "fn main() { let mut err = 0; let f = 1; err = f; }";
    assert!(alpha_equal(a, b, source).is_ok());
    // `f` comes from the source, so it cannot be renamed.
    let c = "fn main() { let mut e = 0; let g = 1; e = g; }";
    assert!(alpha_equal(a, c, source).is_err());
    // Renaming must be consistent.
    let d = "fn main() { let mut err = 0; let f = 1; e = f; }";
    assert!(alpha_equal(a, d, source).is_err());
}
