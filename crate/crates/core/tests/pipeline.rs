mod common;

use common::{random_scenarios, toy_spec};
use heatflow::model::{ModelOptions, PlanningMode};
use heatflow::network::{FlowNetwork, NetworkOptions};
use heatflow::schedule::solve;
use heatflow::solver::SolveParams;

#[test]
fn toy_system_solves_in_every_mode() {
    let spec = toy_spec(2.0, 6.0, 30.0, true);
    let set = random_scenarios(3, 4, 6);
    let opts = NetworkOptions::new(&spec, 6, 3);
    let net = FlowNetwork::build(&spec, &set, &opts).unwrap();
    let params = SolveParams { gap_tol: 1e-9, ..SolveParams::default() };
    for mode in [PlanningMode::Deterministic, PlanningMode::Operational, PlanningMode::Bidding] {
        let t = std::time::Instant::now();
        let (model, sched) = solve(&net, &ModelOptions::with_mode(mode), None, &params).unwrap();
        println!("{mode:?}: obj {} vars {} rows {} nodes {} {:?}", sched.objective, model.problem.num_vars(), model.problem.num_constraints(), sched.nodes, t.elapsed());
        assert!(model.problem.max_violation(&model.problem.variables().iter().map(|_| 0.0).collect::<Vec<_>>()) >= 0.0);
    }
}
