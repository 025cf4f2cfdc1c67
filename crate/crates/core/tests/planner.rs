mod common;

use common::{scenario, vehicle, R_C};
use hjstp::dynamics::{DynSpec, HamRole};
use hjstp::scenario::Scenario;
use hjstp::schedule::ObstacleSchedule;
use hjstp::stp::{lattice, plan_vehicle, PlanContext, PlanKind, PlanRequest, VehiclePlan};

const DT: f64 = 0.1;

fn plan_alone(sc: &Scenario) -> VehiclePlan {
    let grid = sc.planning_grid().unwrap();
    let spec = DynSpec::dubins(sc.dynamics, HamRole::BASIC);
    let v = &sc.vehicles[0];
    let req = PlanRequest { id: v.id.clone(), x0: v.x0, target: v.target, sta: v.sta, t_start: 0.0, depart_now: false };
    let empty = ObstacleSchedule::empty(grid.clone(), lattice(0.0, v.sta, 0.5)).unwrap();
    plan_vehicle(&grid, &sc.planner, spec, PlanKind::Basic, &req, &empty).unwrap()
}

fn lone(counts: [usize; 3]) -> Scenario {
    let mut sc = scenario(vec![vehicle("a", 1, [200.0, 600.0, 0.0], [1000.0, 600.0], 50.0)], 0.0);
    sc.grid.counts = counts.to_vec();
    sc
}

#[test]
fn straight_line_departure_is_conservative_and_converges() {
    // 750 m from the start to the target edge at full speed.
    let exact = 50.0 - 750.0 / 25.0;
    let coarse = plan_alone(&lone([41, 41, 16]));
    let fine = plan_alone(&lone([81, 81, 32]));
    for p in [&coarse, &fine] {
        assert!(p.ldt <= exact + 2.0 * DT, "ldt {} later than the straight-line bound {exact}", p.ldt);
        assert!((p.arrival - p.ldt - 30.0).abs() <= 2.0 * DT, "nominal travel {}", p.arrival - p.ldt);
        assert!(p.arrival <= p.sta + 1e-9);
    }
    // First-order scheme: halving the spacing should cut the lag markedly.
    let (e1, e2) = (exact - coarse.ldt, exact - fine.ldt);
    assert!(e2 < 0.8 * e1, "lag {e1:.2} s on the coarse grid, {e2:.2} s on the fine one");
}

#[test]
fn start_inside_target_departs_at_sta() {
    let sc = scenario(vec![vehicle("a", 1, [1000.0, 600.0, 1.0], [1000.0, 600.0], 20.0)], 0.0);
    let p = plan_alone(&sc);
    assert_eq!(p.ldt, 20.0);
    assert_eq!(p.nominal.len(), 1);
}

#[test]
fn value_decreases_along_nominal() {
    let sc = scenario(vec![vehicle("a", 1, [250.0, 300.0, 1.2], [950.0, 900.0], 60.0)], 0.0);
    let p = plan_alone(&sc);
    let h = sc.planning_grid().unwrap().spacing()[0];
    let vals: Vec<f64> = p.nominal.times.iter().zip(&p.nominal.states).map(|(&t, x)| p.value_at(t, x)).collect();
    assert!(vals[0] <= 0.0);
    for w in vals.windows(2) {
        // Interpolation between snapshots allows a small rise.
        assert!(w[1] <= w[0] + 0.1 * h, "value rose from {} to {}", w[0], w[1]);
    }
    assert!(*vals.last().unwrap() <= 0.0);
}

fn crossing() -> Scenario {
    scenario(
        vec![
            vehicle("a", 1, [150.0, 600.0, 0.0], [1050.0, 600.0], 60.0),
            vehicle("b", 2, [600.0, 150.0, 1.5708], [600.0, 1050.0], 60.0),
        ],
        0.0,
    )
}

#[test]
fn crossing_pair_keeps_separation() {
    let sc = crossing();
    let ctx = PlanContext::new(&sc).unwrap();
    for set in [ctx.basic_stp().unwrap(), ctx.plan_all().unwrap()] {
        let d = set.min_pairwise_distance(DT);
        assert!(d >= R_C, "closest approach {d:.1}");
        for p in &set.plans {
            assert!(p.arrival <= p.sta + 1e-9, "{} arrives at {} after {}", p.id, p.arrival, p.sta);
        }
    }
}

#[test]
fn lower_priority_vehicles_do_not_move_the_first() {
    let sc = crossing();
    let alone = scenario(vec![sc.vehicles[0].clone()].into_iter().map(|v| serde_json::to_value(v).unwrap()).collect(), 0.0);
    let a = PlanContext::new(&alone).unwrap().basic_stp().unwrap();
    let both = PlanContext::new(&sc).unwrap().basic_stp().unwrap();
    assert_eq!(a.plans[0].ldt, both.plans[0].ldt);
    assert_eq!(a.plans[0].nominal, both.plans[0].nominal);
}

#[test]
fn same_path_second_vehicle_departs_later() {
    let sc = scenario(
        vec![
            vehicle("a", 1, [150.0, 600.0, 0.0], [1050.0, 600.0], 50.0),
            vehicle("b", 2, [150.0, 600.0, 0.0], [1050.0, 600.0], 60.0),
        ],
        0.0,
    );
    let set = PlanContext::new(&sc).unwrap().basic_stp().unwrap();
    let (a, b) = (&set.plans[0], &set.plans[1]);
    assert!(b.ldt > a.ldt, "a departs at {}, b at {}", a.ldt, b.ldt);
    assert!(set.min_pairwise_distance(DT) >= R_C);
}
