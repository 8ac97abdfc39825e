mod common;

use common::{
    bfs_path, crossing_instance, random_map, random_trajectory, rng, sampled_conflict,
    time_expanded_arrival, R,
};
use mapf_repair::repair::{egocentric_path, naive_schedule, repair_against};
use mapf_repair::{
    generate_wfi_instance, plan_all, plan_prefix, sipp_plan, sipp_plan_all, validate_solution,
    Cell, CellSet, GeomPath, GridMap, Instance, RepairConfig, RepairMode, Reservations, Trajectory,
};
use rand::Rng;

const DELTA: f64 = 0.1;

/// Well-formed instances on small random maps.
fn small_instances(
    count: usize,
    seed: u64,
    size: std::ops::RangeInclusive<i32>,
    agents: std::ops::RangeInclusive<usize>,
) -> Vec<Instance> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let (w, h) = (rng.gen_range(size.clone()), rng.gen_range(size.clone()));
        let map = random_map(w, h, 0.15, &mut rng);
        let n = rng.gen_range(agents.clone());
        if let Ok(inst) = generate_wfi_instance(&map, n, rng.gen(), None) {
            out.push(inst);
        }
    }
    out
}

fn is_multiple(x: f64, step: f64) -> bool {
    let k = (x / step).round();
    (x - k * step).abs() < 1e-6
}

fn residue(x: f64) -> f64 {
    x.rem_euclid(DELTA)
}

fn same_residue(a: f64, b: f64) -> bool {
    let d = (residue(a) - residue(b)).abs();
    d < 1e-6 || (DELTA - d).abs() < 1e-6
}

#[test]
fn repair_keeps_paths_and_validates() {
    let cfg = RepairConfig::default();
    for inst in small_instances(40, 31, 8..=16, 3..=10) {
        for mode in [RepairMode::Cardinal, RepairMode::AnyAngle] {
            let sol = plan_all(&inst, mode, &cfg).expect("complete on well-formed instances");
            let report = validate_solution(&inst, &sol, R);
            assert!(report.is_valid(), "{report}");
            for (i, tr) in sol.trajectories.iter().enumerate() {
                assert_eq!(
                    tr.cells(),
                    egocentric_path(&inst, i, mode).unwrap().waypoints
                );
            }
        }
        let naive = naive_schedule(&inst, &cfg).unwrap();
        assert!(validate_solution(&inst, &naive, R).is_valid());
    }
}

/// Repairs of random paths against random fixed trajectories whose waits
/// are arbitrary reals, so safe-interval bounds fall off the delta lattice.
fn random_repairs(count: usize, seed: u64) -> Vec<(Reservations, Trajectory)> {
    let mut rng = rng(seed);
    let cfg = RepairConfig::default();
    let mut out = Vec::new();
    while out.len() < count {
        let map = random_map(8, 8, 0.1, &mut rng);
        let fixed: Vec<Trajectory> = (0..rng.gen_range(1..=4))
            .map(|i| random_trajectory(&map, i, &mut rng))
            .collect();
        let used: Vec<Cell> = fixed.iter().flat_map(|t| t.cells()).collect();
        let free: Vec<Cell> = map.passable_cells().filter(|c| !used.contains(c)).collect();
        if free.len() < 2 {
            continue;
        }
        let (a, b) = (
            free[rng.gen_range(0..free.len())],
            free[rng.gen_range(0..free.len())],
        );
        let Some(path) = bfs_path(&map, a, b, &CellSet::new(&map)) else {
            continue;
        };
        let res = Reservations::with_trajectories(&map, R, fixed);
        if let Ok(tr) = repair_against(9, &GeomPath::new(path), &res, &cfg) {
            out.push((res, tr));
        }
    }
    out
}

/// Arrival times sit on the delta lattice through either time zero or the
/// start of a safe interval of some earlier waypoint.
fn check_lattice(res: &Reservations, tr: &Trajectory) -> usize {
    let mut anchors = vec![0.0];
    let mut travel = 0.0;
    let mut aligned = 0;
    for (j, p) in tr.points.iter().enumerate() {
        if j > 0 {
            travel += tr.points[j - 1].cell.euclidean(p.cell) / tr.speed;
        }
        for iv in &res.safe_intervals(p.cell).intervals {
            anchors.push(iv.lo - travel);
        }
        let shift = p.t_arrive - travel;
        assert!(
            anchors.iter().any(|&a| same_residue(shift, a)),
            "agent {} waypoint {j}: arrival {} off the lattice",
            tr.agent_id,
            p.t_arrive
        );
        aligned += usize::from(!is_multiple(shift, DELTA));
    }
    aligned
}

/// Reducing one wait by delta, all later times shifting with it, must run
/// into a fixed trajectory.
fn check_minimal_waits(res: &Reservations, tr: &Trajectory) -> usize {
    let path = tr.path();
    let waits: Vec<f64> = tr.waits().collect();
    let mut checked = 0;
    for j in 0..tr.points.len() - 1 {
        if waits[j] < DELTA - 1e-9 {
            continue;
        }
        let mut t = 0.0;
        let mut shorter = Vec::new();
        for (i, w) in path.waypoints.windows(2).enumerate() {
            t += if i == j { waits[i] - DELTA } else { waits[i] };
            shorter.push(t);
            t += w[0].euclidean(w[1]) / tr.speed;
        }
        let alt = Trajectory::from_departures(tr.agent_id, &path, tr.speed, 0.0, &shorter);
        assert!(
            alt.segments().iter().any(|s| !res.is_free(s)),
            "agent {}: wait at waypoint {j} could be {DELTA} shorter",
            tr.agent_id
        );
        checked += 1;
    }
    checked
}

#[test]
fn waits_are_quantized_or_aligned() {
    let cfg = RepairConfig::default();
    for inst in small_instances(40, 32, 6..=8, 6..=12) {
        let sol = plan_all(&inst, RepairMode::Cardinal, &cfg).unwrap();
        for (k, tr) in sol.trajectories.iter().enumerate() {
            let res = Reservations::with_trajectories(
                &inst.map,
                R,
                sol.trajectories[..k].iter().cloned(),
            );
            check_lattice(&res, tr);
        }
    }
    let aligned: usize = random_repairs(300, 37)
        .iter()
        .map(|(res, tr)| check_lattice(res, tr))
        .sum();
    assert!(aligned > 0, "no alignment wait exercised");
}

#[test]
fn shortening_any_wait_reintroduces_a_conflict() {
    let cfg = RepairConfig::default();
    let mut checked = 0;
    for inst in small_instances(40, 33, 6..=10, 4..=8) {
        let sol = plan_all(&inst, RepairMode::Cardinal, &cfg).unwrap();
        for (k, tr) in sol.trajectories.iter().enumerate() {
            let res = Reservations::with_trajectories(
                &inst.map,
                R,
                sol.trajectories[..k].iter().cloned(),
            );
            checked += check_minimal_waits(&res, tr);
        }
    }
    for (res, tr) in random_repairs(300, 38) {
        checked += check_minimal_waits(&res, &tr);
    }
    assert!(checked > 50, "only {checked} waits checked");
}

#[test]
fn prefixes_plan_identically() {
    let cfg = RepairConfig::default();
    for inst in small_instances(8, 34, 8..=12, 4..=8) {
        for mode in [RepairMode::Cardinal, RepairMode::AnyAngle] {
            let full = plan_all(&inst, mode, &cfg).unwrap();
            for i in 1..=inst.len() {
                let part = plan_prefix(&inst, i, mode, &cfg).unwrap();
                assert_eq!(part.trajectories[..], full.trajectories[..i]);
            }
        }
    }
}

#[test]
fn crossing_wait_matches_a_sampled_delta_grid() {
    let inst = crossing_instance();
    let sol = plan_all(&inst, RepairMode::Cardinal, &RepairConfig::default()).unwrap();
    let a = &sol.trajectories[0];
    let path = egocentric_path(&inst, 1, RepairMode::Cardinal).unwrap();
    let first_ok = (0..100)
        .map(|k| k as f64 * DELTA)
        .find(|&w| {
            let deps = [0.0, 1.0 + w, 2.0 + w, 3.0 + w];
            let b = Trajectory::from_departures(1, &path, 1.0, 0.0, &deps);
            !sampled_conflict(a, &b, R, 1e-3, 12.0)
        })
        .unwrap();
    assert!((first_ok - 1.5).abs() < 1e-9, "{first_ok}");
    let waits: Vec<f64> = sol.trajectories[1].waits().collect();
    assert!((waits[1] - first_ok).abs() < 1e-9);
}

#[test]
fn sipp_is_valid_and_matches_the_oracle() {
    let cfg = RepairConfig::default();
    for inst in small_instances(12, 35, 5..=7, 2..=3) {
        let sol = sipp_plan_all(&inst, &cfg).unwrap();
        assert!(validate_solution(&inst, &sol, R).is_valid());
        let endpoints = inst.endpoints();
        for (i, agent) in inst.agents.iter().enumerate() {
            let extra = inst.endpoints_except(&endpoints, agent);
            let want = time_expanded_arrival(
                &inst.map,
                agent.start,
                agent.goal,
                &extra,
                &sol.trajectories[..i],
                R,
            )
            .expect("oracle finds a plan");
            let got = sol.trajectories[i].arrival_time();
            assert!(
                (got - want).abs() < 1e-6,
                "agent {i}: sipp {got} vs oracle {want}"
            );
        }
    }
}

#[test]
fn sipp_without_traffic_is_a_shortest_path() {
    let mut rng = rng(36);
    for _ in 0..100 {
        let map = random_map(12, 12, 0.2, &mut rng);
        let none = CellSet::new(&map);
        let (a, b) = (
            common::random_cell(&map, &mut rng),
            common::random_cell(&map, &mut rng),
        );
        let bfs = common::bfs_path(&map, a, b, &none);
        let tr = sipp_plan(&map, 0, a, b, &none, &[], &RepairConfig::default());
        assert_eq!(
            tr.as_ref().map(|t| t.arrival_time()),
            bfs.map(|p| (p.len() - 1) as f64)
        );
        if let Some(tr) = tr {
            assert_eq!(tr.total_wait(), 0.0);
        }
    }
}

#[test]
fn sipp_can_beat_repair_on_the_crossing() {
    let inst = crossing_instance();
    let sol = sipp_plan_all(&inst, &RepairConfig::default()).unwrap();
    assert!(sol.flowtime() <= 9.5 + 1e-9);
    assert!(validate_solution(&inst, &sol, R).is_valid());
    let _: &GridMap = &inst.map;
}
