mod common;

use prescriptor::exact::solve_extensive;
use prescriptor::model::build_scenario_tree;
use prescriptor::sddp::{solve_sddp, SddpConfig};

#[test]
fn lower_bound_reaches_exact_on_random_instances() {
    for seed in 0..20 {
        let inst = common::random_instance(seed);
        let models = inst.fit_weights(seed).unwrap();
        let tree = build_scenario_tree(&inst, &models).unwrap();
        let exact = solve_extensive(&inst, &tree).unwrap().objective;
        let config = SddpConfig {
            gap_tol: 0.0,
            seed,
            ..SddpConfig::default()
        };
        let run = solve_sddp(&inst, &models, &config).unwrap();
        let trace = run.lb_trace();
        assert!(
            trace.windows(2).all(|w| w[1] >= w[0] - 1e-9),
            "seed {seed}: {trace:?}"
        );
        println!(
            "seed {seed}: exact {exact} lb {} ub {} iters {} {:?}",
            run.lb, run.ub, run.iterations, run.stop
        );
        assert!(
            (run.lb - exact).abs() <= 1e-4 * (1.0 + exact.abs()),
            "seed {seed}: lb {} exact {exact}",
            run.lb
        );
    }
}
