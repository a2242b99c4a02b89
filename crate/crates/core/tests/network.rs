mod common;

use std::collections::{BTreeSet, HashMap};

use common::{mini_spec, random_scenarios, start, synthetic_store, Toy};
use heatflow::network::{ArcKind, FlowNetwork, NetworkOptions, Role};
use heatflow::rolling::StoreSource;
use heatflow::scenario::planning_scenarios;
use heatflow::series::parse_timestamp;
use heatflow::Error;

fn toy_net(storage: bool, buying: bool, penalty_vertices: bool) -> FlowNetwork {
    let spec = Toy { storage, buying, penalty_vertices, ..Toy::default() }.spec();
    let set = random_scenarios(5, 3, 8);
    FlowNetwork::build(&spec, &set, &NetworkOptions::new(&spec, 8, 4)).unwrap()
}

fn mini_net() -> FlowNetwork {
    let spec = mini_spec();
    let store = synthetic_store(parse_timestamp("2021-01-04").unwrap(), 35, 2);
    let source = StoreSource::new(&spec, &store);
    let set = planning_scenarios(&store, &source.price, &source.heat, &source.known, start(), 12).unwrap();
    FlowNetwork::build(&spec, &set, &NetworkOptions::new(&spec, 12, 6)).unwrap()
}

fn nets() -> Vec<FlowNetwork> {
    vec![toy_net(false, false, true), toy_net(true, true, true), toy_net(true, false, false), mini_net()]
}

#[test]
fn every_arc_sits_in_exactly_one_in_and_one_out_bucket() {
    for net in nets() {
        let mut seen_in = vec![0usize; net.arcs.len()];
        let mut seen_out = vec![0usize; net.arcs.len()];
        for v in 0..net.vertices.len() {
            for e in 0..net.energies.len() {
                for t in 0..net.horizon {
                    for w in 0..net.num_scenarios() {
                        for &a in net.arcs_in(v, e, t, w) {
                            let arc = &net.arcs[a];
                            assert_eq!((arc.to, arc.energy, arc.scenario), (v, e, w));
                            assert_eq!(arc.t_end, t);
                            seen_in[a] += 1;
                        }
                        for &a in net.arcs_out(v, e, t, w) {
                            let arc = &net.arcs[a];
                            assert_eq!((arc.from, arc.energy, arc.scenario, arc.t), (v, e, w, t));
                            seen_out[a] += 1;
                        }
                    }
                }
            }
        }
        assert!(seen_in.iter().all(|&c| c == 1), "{}", net.name);
        assert!(seen_out.iter().all(|&c| c == 1), "{}", net.name);
    }
}

#[test]
fn arc_counts_follow_links_and_storages() {
    for net in nets() {
        let ns = net.num_scenarios();
        let count = |k: ArcKind| net.arcs.iter().filter(|a| a.kind == k).count();
        assert_eq!(count(ArcKind::Flow), net.links.len() * net.horizon * ns);
        assert_eq!(count(ArcKind::Initial), net.storages.len() * ns);
        assert_eq!(count(ArcKind::Target), net.storages.len() * ns);
        assert_eq!(count(ArcKind::Carry), net.storages.len() * (net.horizon - 1) * ns);
        assert!(net.arcs.iter().all(|a| a.lower <= a.upper && a.lower >= 0.0));
    }
}

#[test]
fn siblings_cover_each_scenario_once() {
    for net in nets() {
        let ns = net.num_scenarios();
        for (a, arc) in net.arcs.iter().enumerate() {
            let sib = net.siblings(a);
            assert_eq!(sib.len(), ns);
            assert!(sib.contains(&a));
            let scen: BTreeSet<usize> = sib.iter().map(|&s| net.arcs[s].scenario).collect();
            assert_eq!(scen.len(), ns);
            for &s in sib {
                let o = &net.arcs[s];
                assert_eq!((o.from, o.to, o.energy, o.t, o.t_end, o.kind), (arc.from, arc.to, arc.energy, arc.t, arc.t_end, arc.kind));
            }
        }
    }
}

#[test]
fn arc_names_are_unique_and_decodable() {
    for net in nets() {
        let mut names = HashMap::new();
        for a in 0..net.arcs.len() {
            let name = net.arc_name(a);
            let parts: Vec<&str> = name.split("__").collect();
            assert_eq!(parts.len(), 7, "{name}");
            let arc = &net.arcs[a];
            assert_eq!(net.vertex_id(parts[1]), Some(arc.from));
            assert_eq!(net.vertex_id(parts[2]), Some(arc.to));
            assert_eq!(net.energy_id(parts[3]), Some(arc.energy));
            assert_eq!(parts[4].parse::<usize>().unwrap(), arc.t);
            assert_eq!(parts[6].parse::<usize>().unwrap(), arc.scenario);
            assert!(names.insert(name, a).is_none());
        }
    }
}

#[test]
fn artificial_vertices_are_added_per_market_and_demand() {
    let net = toy_net(true, true, true);
    let roles: Vec<Role> = net.vertices.iter().map(|v| v.role).collect();
    for (mi, m) in net.markets.iter().enumerate() {
        assert_eq!(net.vertices[m.da].role, Role::MarketDa(mi));
        assert_eq!(net.vertices[m.bmb].role, Role::MarketBmb(mi));
        assert_eq!(net.vertices[m.bms].role, Role::MarketBms(mi));
        assert!(m.penalty > 0.0);
    }
    assert!(roles.iter().any(|r| matches!(r, Role::Missing(_))));
    assert!(roles.iter().any(|r| matches!(r, Role::Excess(_))));
    assert_eq!(roles.iter().filter(|r| matches!(r, Role::StorageInit(_))).count(), net.storages.len());
    assert_eq!(roles.iter().filter(|r| matches!(r, Role::StorageTarget(_))).count(), net.storages.len());

    let plain = toy_net(true, false, false);
    assert!(!plain.vertices.iter().any(|v| matches!(v.role, Role::Missing(_) | Role::Excess(_))));
    for v in &plain.vertices {
        assert_eq!(v.role.is_artificial(), v.spec.is_none(), "{}", v.id);
    }
}

#[test]
fn first_stage_arcs_leave_first_stage_units_early() {
    for net in nets() {
        let mut any = false;
        for (a, arc) in net.arcs.iter().enumerate() {
            let expect = arc.kind == ArcKind::Flow && arc.t < net.first_stage && net.vertices[arc.from].first_stage;
            assert_eq!(net.is_first_stage_arc(a), expect);
            any |= expect;
        }
        assert!(any, "{}", net.name);
    }
}

#[test]
fn bad_horizons_are_rejected() {
    let spec = Toy::default().spec();
    let set = random_scenarios(1, 2, 6);
    assert!(matches!(FlowNetwork::build(&spec, &set, &NetworkOptions::new(&spec, 0, 0)), Err(Error::Config(_))));
    assert!(matches!(FlowNetwork::build(&spec, &set, &NetworkOptions::new(&spec, 7, 2)), Err(Error::Data(_))));
    let net = FlowNetwork::build(&spec, &set, &NetworkOptions::new(&spec, 6, 10)).unwrap();
    assert_eq!(net.first_stage, 6);
}
