use std::collections::HashSet;

use polymer_lab::decompose::{
    crossing_profile, hw_decompose, irreducible_pieces, is_bridge, is_irreducible,
    renewal_crossing_sandwich, renewal_times, zigzags,
};
use polymer_lab::enumerate::{
    bridge_gap_constants, enumerate_all, enumerate_sharded, EnumerateOptions,
};
use polymer_lab::lattice::{StepSet, Walk};
use polymer_lab::model::{local_times, validate_potential, LocalTimeMap};
use polymer_lab::montecarlo::{
    ballistic_scan, endpoint_law, BallisticConfig, IbLibrary, SamplingMode,
};
use polymer_lab::transform::{stickbreak, unfold};
use polymer_lab::{JumpDistribution, Model, Potential, PotentialKind};
use proptest::prelude::*;

const COMPASS: [[i32; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];

fn walk_from(choices: &[usize]) -> Walk {
    let steps: Vec<[i32; 2]> = choices.iter().map(|&k| COMPASS[k % 4]).collect();
    Walk::from_steps(2, &steps).unwrap()
}

fn walks(max_len: usize) -> impl Strategy<Value = Walk> {
    prop::collection::vec(0usize..4, 0..=max_len).prop_map(|c| walk_from(&c))
}

/// Walks with a strong eastward drift, filtered to bridges.
fn bridges(max_len: usize) -> impl Strategy<Value = Walk> {
    prop::collection::vec(
        prop_oneof![3 => Just(0usize), 1 => Just(1), 1 => Just(2), 1 => Just(3)],
        1..=max_len,
    )
    .prop_map(|c| walk_from(&c))
    .prop_filter("bridge", is_bridge)
}

fn potentials() -> impl Strategy<Value = Potential> {
    prop_oneof![
        Just(Potential::free()),
        Just(Potential::saw()),
        (0.0f64..3.0).prop_map(|k| Potential::weak(k).unwrap()),
    ]
}

fn nn(phi: Potential) -> Model {
    Model::nearest_neighbor(2, phi).unwrap()
}

fn renewal_oracle(xs: &[i32]) -> Vec<usize> {
    let n = xs.len() - 1;
    (1..n)
        .filter(|&i| (0..i).all(|k| xs[k] <= xs[i]) && (i + 1..=n).all(|k| xs[i] < xs[k]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weight_is_invariant_under_lattice_symmetries(w in walks(30), phi in potentials()) {
        let model = nn(phi);
        let a = model.weight(&w).unwrap().0;
        for image in [w.reflect_x(), w.rotate_xy_clockwise()] {
            let b = model.weight(&image).unwrap().0;
            prop_assert!(a == b || (a - b).abs() < 1e-12, "{} vs {}", a, b);
        }
    }

    #[test]
    fn weight_factorises_sub_multiplicatively(w in walks(30), phi in potentials(), cut in 0usize..=30) {
        let model = nn(phi);
        let k = cut.min(w.len());
        let whole = model.weight(&w).unwrap().0;
        let parts = model.weight(&w.segment(0, k)).unwrap().0 + model.weight(&w.segment(k, w.len())).unwrap().0;
        prop_assert!(whole == f64::NEG_INFINITY || whole <= parts + 1e-12);
    }

    #[test]
    fn bridges_factorise_exactly(a in bridges(15), b in bridges(15), k in 0.0f64..2.0) {
        let model = nn(Potential::weak(k).unwrap());
        let joined = a.concatenate(&b);
        let lhs = model.weight(&joined).unwrap().0;
        let rhs = model.weight(&a).unwrap().0 + model.weight(&b).unwrap().0;
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn local_times_count_every_index(w in walks(40)) {
        let lt = local_times(&w);
        prop_assert_eq!(lt.total(), w.len() as u64 + 1);
    }

    #[test]
    fn split_and_concatenate_round_trip(w in walks(30), cut in 0usize..=30) {
        let k = cut.min(w.len());
        prop_assert_eq!(w.segment(0, k).concatenate(&w.segment(k, w.len())), w);
    }

    #[test]
    fn concatenation_is_associative(a in walks(10), b in walks(10), c in walks(10)) {
        prop_assert_eq!(a.concatenate(&b).concatenate(&c), a.concatenate(&b.concatenate(&c)));
    }

    #[test]
    fn renewal_times_match_the_definition(w in walks(40)) {
        prop_assert_eq!(renewal_times(&w).times, renewal_oracle(&w.xs()));
    }

    #[test]
    fn hw_decomposition_round_trips(w in walks(40)) {
        let steps = StepSet::nearest_neighbor(2).unwrap();
        let d = hw_decompose(&w, &steps);
        prop_assert_eq!(d.reconstruct(), w.clone());
        for part in [&d.negative_widths, &d.positive_widths] {
            prop_assert!(part.windows(2).all(|p| p[0] > p[1]), "widths {:?}", part);
        }
        for b in d.negative_part.iter().chain(&d.positive_part) {
            prop_assert!(is_bridge(b));
        }
        let extra = usize::from(d.prepended_step.is_some());
        prop_assert_eq!(d.total_steps(), w.len() + extra);
    }

    #[test]
    fn irreducible_pieces_rebuild_the_bridge(b in bridges(30)) {
        let pieces = irreducible_pieces(&b).unwrap();
        prop_assert_eq!(pieces.len(), renewal_times(&b).len() + 1);
        let rebuilt = pieces.iter().skip(1).fold(pieces[0].clone(), |acc, p| acc.concatenate(p));
        prop_assert_eq!(rebuilt, b);
        prop_assert!(pieces.iter().all(is_irreducible));
    }

    #[test]
    fn crossing_sets_are_nested(w in walks(40), m in 1u32..5) {
        let p = crossing_profile(&w);
        let small: HashSet<i32> = p.rl(m).into_iter().collect();
        let large: HashSet<i32> = p.rl(m + 1).into_iter().collect();
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn nearest_neighbour_renewals_biject_with_once_crossed_planes(b in bridges(40)) {
        let s = renewal_crossing_sandwich(&b, 1);
        prop_assert_eq!(s.once_crossed, s.renewals + 1);
    }

    #[test]
    fn unfolding_keeps_its_promises(b in bridges(30), k in 0.0f64..2.0) {
        let model = nn(Potential::weak(k).unwrap());
        let zz = zigzags(&b).unwrap();
        prop_assume!(!zz.is_empty());
        let before = model.weight(&b).unwrap().0;
        for &(i, j) in &zz.pairs {
            let u = unfold(&b, i, j).unwrap();
            prop_assert!(is_bridge(&u));
            prop_assert!(model.weight(&u).unwrap().0 >= before - 1e-12);
            prop_assert!(u.x(u.len()) > b.x(b.len()));
            let r = renewal_times(&u);
            prop_assert!(r.contains(i) && r.contains(j));
        }
    }

    #[test]
    fn stickbreaking_preserves_weight(b in bridges(30), phi in potentials()) {
        let model = nn(phi);
        let d = polymer_lab::decompose::diamond_times(&b).unwrap();
        prop_assume!(d.len() >= 2);
        let (i, j) = (d[0], d[d.len() - 1]);
        let s = stickbreak(&b, i, j).unwrap();
        prop_assert_eq!(s.len(), b.len());
        let (a, c) = (model.weight(&b).unwrap().0, model.weight(&s).unwrap().0);
        prop_assert!(a == c || (a - c).abs() < 1e-12);
    }

    #[test]
    fn incremental_updates_telescope(w in walks(25), k in 0.0f64..2.0) {
        let phi = Potential::weak(k).unwrap();
        let mut state = LocalTimeMap::new();
        state.push(w.point(0));
        let mut total = 0.0;
        for i in 1..=w.len() {
            total += polymer_lab::model::incremental_weight_delta(&state, w.point(i), 0.25, &phi).unwrap().0;
            state.push(w.point(i));
        }
        let direct = nn(phi).weight(&w).unwrap().0;
        prop_assert!((total - direct).abs() < 1e-12);
    }

    #[test]
    fn tabulated_potentials_are_validated_exhaustively(values in prop::collection::vec(0.0f64..10.0, 2..8)) {
        let mut table = vec![0.0, 0.0];
        table.extend(values);
        let cap = table.len() - 1;
        let superadditive = (2..=cap).all(|t| (1..t).all(|a| table[t] >= table[a] + table[t - a]));
        let monotone = table.windows(2).all(|w| w[0] <= w[1]);
        let accepted = validate_potential(PotentialKind::Table { values: table }, cap).is_ok();
        prop_assert_eq!(accepted, superadditive && monotone);
    }
}

/// Kesten's renewal relation `H(z) = 1 / (1 − B(z))` as power series: the
/// irreducible-bridge masses follow from the bridge sums alone.
#[test]
fn irreducible_masses_invert_the_bridge_series() {
    for phi in [
        Potential::free(),
        Potential::saw(),
        Potential::weak(0.8).unwrap(),
    ] {
        let r = enumerate_all(&nn(phi), 9).unwrap();
        let h: Vec<f64> = r.rows.iter().map(|row| row.h).collect();
        let mut b = vec![0.0; h.len()];
        for n in 1..h.len() {
            b[n] = h[n] - (1..n).map(|k| b[k] * h[n - k]).sum::<f64>();
            assert!((b[n] - r.ib_mass(n)).abs() < 1e-14, "n = {n}");
        }
    }
}

#[test]
fn sharding_depth_does_not_change_the_report() {
    let model = nn(Potential::weak(0.5).unwrap());
    let reference = enumerate_all(&model, 7).unwrap();
    for depth in 0..7 {
        let r = enumerate_sharded(&model, &EnumerateOptions::new(7).prefix_depth(depth)).unwrap();
        for (a, b) in reference.rows.iter().zip(&r.rows) {
            assert!((a.z - b.z).abs() <= 1e-15 * a.z.abs().max(1.0));
            assert_eq!(a.bridges, b.bridges);
        }
    }
}

#[test]
fn spread_out_model_is_normalised_and_symmetric() {
    let steps = StepSet::symmetric_closure(2, &[[1, 0].into(), [1, 1].into()]).unwrap();
    let model = Model::new(JumpDistribution::uniform(steps), Potential::free());
    let r = enumerate_all(&model, 4).unwrap();
    assert!(r.rows.iter().all(|row| (row.z - 1.0).abs() < 1e-12));
    let law = endpoint_law(&model, 3, u64::MAX).unwrap();
    let marg = law.x_marginal();
    for (x, p) in &marg {
        let mirror = marg.iter().find(|(y, _)| *y == -x).unwrap().1;
        assert!((p - mirror).abs() < 1e-15);
    }
}

#[test]
fn tails_decrease_in_velocity() {
    let cfg = BallisticConfig {
        schedule: vec![5, 7],
        velocities: (0..=10).map(|k| k as f64 / 10.0).collect(),
        mode: SamplingMode::Exact,
        ..BallisticConfig::default()
    };
    let r = ballistic_scan(&nn(Potential::saw()), &cfg).unwrap();
    for row in &r.rows {
        assert!(row
            .tails
            .windows(2)
            .all(|t| t[1].probability <= t[0].probability));
        assert!(row
            .tails
            .iter()
            .all(|t| (0.0..=1.0).contains(&t.probability)));
    }
}

#[test]
fn single_piece_process_follows_the_library_law() {
    use polymer_lab::montecarlo::simulate_ib_process;
    let lib = IbLibrary::build(&nn(Potential::saw()), 4, None, u64::MAX).unwrap();
    let mut counts = vec![0usize; lib.len()];
    let draws = 20_000;
    for seed in 0..draws {
        let t = simulate_ib_process(&lib, 1, seed);
        counts[t.piece_indices[0]] += 1;
    }
    // multinomial check: every cell within 5 binomial standard deviations
    for (c, &p) in counts.iter().zip(&lib.probabilities) {
        let mean = p * draws as f64;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - mean).abs() <= 5.0 * sd + 1.0, "{c} vs {mean}");
    }
}

#[test]
fn bridge_gap_constants_settle_down() {
    for phi in [
        Potential::free(),
        Potential::saw(),
        Potential::weak(1.0).unwrap(),
    ] {
        let r = enumerate_all(&nn(phi), 10).unwrap();
        let c = bridge_gap_constants(&r);
        assert_eq!(c.len(), 10);
        assert!(c.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(c.windows(2).all(|w| w[1] <= w[0]), "{c:?}");
    }
}
