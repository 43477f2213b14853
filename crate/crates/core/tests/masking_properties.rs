mod common;

use proptest::prelude::*;

use common::{gen_case, run_case, schema_preserved, GenConfig};
use maskgate::evaluator::CompiledPlan;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn plan_matches_oracle_over_unpruned_pairs(seed in any::<u64>()) {
        let case = gen_case(seed, &GenConfig::default());
        let out = run_case(&case);
        prop_assert_eq!(&out.planned, &out.oracle, "seed {}\n{}", seed, out.compiled.view.sql);
    }

    #[test]
    fn output_schema_is_input_schema(seed in any::<u64>()) {
        let case = gen_case(seed, &GenConfig::default());
        let out = run_case(&case);
        prop_assert!(schema_preserved(&case.relation, &out.compiled.view.schema, &out.planned));
    }

    #[test]
    fn row_count_never_grows(seed in any::<u64>()) {
        let case = gen_case(seed, &GenConfig::default());
        let out = run_case(&case);
        prop_assert!(out.planned.len() <= case.relation.len());
        if out.compiled.view.row_filter_count() == 0 {
            prop_assert_eq!(out.planned.len(), case.relation.len());
        }
    }

    #[test]
    fn masking_twice_equals_masking_once(seed in any::<u64>()) {
        let cfg = GenConfig { is_null_filters: false, ..GenConfig::default() };
        let case = gen_case(seed, &cfg);
        let plan = CompiledPlan::new(&run_case(&case).compiled.view).unwrap();
        let (once, _) = plan.apply(&case.relation, &case.resolver).unwrap();
        let (twice, _) = plan.apply(&once, &case.resolver).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn one_mask_call_per_retained_column_pair(seed in any::<u64>()) {
        let case = gen_case(seed, &GenConfig::default());
        let out = run_case(&case);
        let view = &out.compiled.view;
        let retained_columns = out
            .compiled
            .pruned_tree
            .pairs()
            .iter()
            .filter(|(p, _)| p.root_attribute().is_some())
            .count();
        prop_assert_eq!(view.column_mask_count(), retained_columns);
        prop_assert_eq!(view.sql.matches("MASK_FIELD_IF(").count(), retained_columns);
    }

    #[test]
    fn compilation_is_deterministic(seed in any::<u64>()) {
        let case = gen_case(seed, &GenConfig::default());
        let a = run_case(&case).compiled.view;
        let b = run_case(&case).compiled.view;
        prop_assert_eq!(a.sql, b.sql);
        prop_assert_eq!(a.plan, b.plan);
        prop_assert_eq!(a.inputs_digest, b.inputs_digest);
    }
}
