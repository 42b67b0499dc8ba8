mod common;

use common::dsl_ref::{actual, random_plan, random_table, reference, Out, Plan, Term};
use insightgen_core::dsl::{mask_constants, run, EvalLimits, Value};
use insightgen_core::table::serialize_csv;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn evaluator_matches_reference(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        let plan = random_plan(&mut rng, &t);
        let got = actual(&plan, &t);
        let want = reference(&plan, &t);
        prop_assert_eq!(got, want, "{}", plan.source());
    }

    #[test]
    fn group_sizes_partition_the_frame(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        let key = &t.columns()[0].name;
        let v = run(&format!("table.groupby('{key}').size()"), &t, &EvalLimits::default()).unwrap();
        let Value::Series(s) = v else { panic!("series expected") };
        let total: i64 = s.values.iter().map(|c| match c { insightgen_core::Cell::Int(n) => *n, _ => 0 }).sum();
        prop_assert_eq!(total as usize, t.row_count());
    }

    #[test]
    fn filtered_rows_satisfy_predicate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        let mut plan = random_plan(&mut rng, &t);
        plan.term = Term::SortHead { col: t.columns()[0].name.clone(), asc: true, n: 0 };
        let Some(pred) = plan.filter.clone() else { return Ok(()) };
        let src = plan.source().replace(".sort_values(by='c0', ascending=True).head(0)", "");
        let Ok(Value::Frame(f)) = run(&src, &t, &EvalLimits::default()) else { return Ok(()) };
        prop_assert!(f.len() <= t.row_count());
        for label in &f.index {
            let insightgen_core::Cell::Int(r) = label else { panic!("row label") };
            prop_assert_eq!(common::dsl_ref::eval_pred(&pred, &t, *r as usize), Ok(true));
        }
    }

    #[test]
    fn masking_is_idempotent_and_drops_literals(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        let plan: Plan = random_plan(&mut rng, &t);
        let masked = mask_constants(&plan.source()).unwrap();
        prop_assert_eq!(mask_constants(&masked).unwrap(), masked.clone());
        prop_assert!(!masked.contains(['\'', '"']));
        prop_assert!(!masked.chars().any(|c| c.is_ascii_digit() || c.is_whitespace()));
    }

    #[test]
    fn evaluation_leaves_table_unchanged(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        let before = serialize_csv(&t);
        let plan = random_plan(&mut rng, &t);
        let _ = run(&plan.source(), &t, &EvalLimits::default());
        prop_assert_eq!(serialize_csv(&t), before);
    }
}

#[test]
fn reference_agrees_on_a_known_case() {
    let t = insightgen_core::fixtures::snooker();
    let plan = Plan { filter: None, term: Term::ValueCountsIdxmax { col: "Year".into() } };
    assert_eq!(reference(&plan, &t), Ok(Out::Scalar(insightgen_core::Cell::Int(1990))));
    assert_eq!(actual(&plan, &t), reference(&plan, &t));
}
