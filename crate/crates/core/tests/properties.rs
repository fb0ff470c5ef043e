use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::{SMatrix, SVector, Vector3};
use proptest::prelude::*;

use slidewin::assignment::{self, brute_force_oracle, AssignmentProblem};
use slidewin::filter::{mahalanobis_sq, ConstantVelocity, GaussianBelief};
use slidewin::graph::{dense_counts, AssociationGraph, Gates, GraphParams};
use slidewin::hypothesis::{BranchLimits, HypothesisMap};
use slidewin::io::{DetectionRecord, TrackRecord};
use slidewin::metrics::{amota, match_frame, recall_term, ErrorCounts, RecallLevel};
use slidewin::scoring::{kinematic_increment, similarity_increment, HypothesisScorer};
use slidewin::sim::{self, ScenarioSpec};
use slidewin::{
    normalize_yaw, ClassLabel, Detection, DetectionId, GroundTruthRecord, TrackId, TrackOutput,
    Tracker, TrackerConfig,
};

fn class_strategy() -> impl Strategy<Value = ClassLabel> {
    prop_oneof![
        Just(ClassLabel::Car),
        Just(ClassLabel::Pedestrian),
        Just(ClassLabel::Bicycle),
        "[a-z]{3,8}".prop_map(|s| s.parse::<ClassLabel>().unwrap()),
    ]
}

fn finite(r: f64) -> impl Strategy<Value = f64> {
    -r..r
}

prop_compose! {
    fn detection_record()(
        scene in "[a-z0-9-]{1,12}",
        frame in 0usize..10_000,
        t in 0.0f64..1e5,
        class in class_strategy(),
        p in prop::array::uniform3(finite(1e3)),
        yaw in finite(3.0),
        size in prop::array::uniform3(0.1f64..20.0),
        vel in prop::option::of(prop::array::uniform3(finite(50.0))),
        conf in 0.001f64..1.0,
        emb in prop::option::of((0.1f64..1.0, prop::collection::vec(finite(1.0), 0..7))),
        id in prop::option::of(any::<u64>()),
    ) -> DetectionRecord {
        DetectionRecord {
            format_version: 1,
            scene_id: scene,
            frame_index: frame,
            timestamp: t,
            class,
            x: p[0], y: p[1], z: p[2],
            yaw,
            l: size[0], w: size[1], h: size[2],
            vx: vel.map(|v| v[0]), vy: vel.map(|v| v[1]), vz: vel.map(|v| v[2]),
            confidence: conf,
            embedding: emb.map(|(a, rest)| unit(&[vec![a], rest].concat())),
            detection_id: id,
        }
    }
}

proptest! {
    #[test]
    fn detection_records_round_trip_bit_identically(rec in detection_record()) {
        let text = serde_json::to_string(&rec).unwrap();
        let back: DetectionRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let d = rec.to_detection(7).unwrap();
        let again = DetectionRecord::from_detection(&rec.scene_id, &d);
        let d2 = again.to_detection(7).unwrap();
        prop_assert_eq!(d, d2);
    }

    #[test]
    fn yaw_normalization_is_idempotent(a in -1e6f64..1e6) {
        let once = normalize_yaw(a).unwrap();
        prop_assert_eq!(normalize_yaw(once).unwrap(), once);
        prop_assert!(once > -std::f64::consts::PI - 1e-12 && once <= std::f64::consts::PI);
    }
}

fn random_psd() -> impl Strategy<Value = SMatrix<f64, 6, 6>> {
    prop::collection::vec(-2.0f64..2.0, 36).prop_map(|v| {
        let a = SMatrix::<f64, 6, 6>::from_iterator(v);
        a * a.transpose() + SMatrix::<f64, 6, 6>::identity() * 1e-3
    })
}

#[derive(Debug, Clone)]
enum FilterOp {
    Predict(f64),
    Update([f64; 3]),
}

fn filter_op() -> impl Strategy<Value = FilterOp> {
    prop_oneof![
        (0.01f64..3.0).prop_map(FilterOp::Predict),
        prop::array::uniform3(finite(20.0)).prop_map(FilterOp::Update),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn covariance_stays_symmetric_psd(p0 in random_psd(), ops in prop::collection::vec(filter_op(), 1..30)) {
        let model = ConstantVelocity::from_config(&TrackerConfig::default());
        let mut b = GaussianBelief::new(SVector::<f64, 6>::zeros(), p0);
        for op in ops {
            b = match op {
                FilterOp::Predict(dt) => model.predict(&b, dt).unwrap(),
                FilterOp::Update(z) => model.update_position(&b, &Vector3::from(z)).unwrap().posterior,
            };
            prop_assert!(b.is_symmetric_psd(), "{:?}", b.covariance);
        }
    }

    #[test]
    fn predicted_mean_composes_over_time(m in prop::array::uniform6(finite(100.0)), dt1 in 0.0f64..5.0, dt2 in 0.0f64..5.0) {
        let mean = SVector::<f64, 6>::from(m);
        let a = ConstantVelocity::transition(dt2) * (ConstantVelocity::transition(dt1) * mean);
        let b = ConstantVelocity::transition(dt1 + dt2) * mean;
        prop_assert!((a - b).abs().max() <= 1e-9);
    }

    #[test]
    fn identity_mahalanobis_is_squared_norm(v in prop::array::uniform3(finite(1e3))) {
        let v = Vector3::from(v);
        prop_assert_eq!(mahalanobis_sq(&v, &SMatrix::<f64, 3, 3>::identity()).unwrap(), v.norm_squared());
    }

    #[test]
    fn kinematic_increment_decreases_with_distance(r1 in 0.0f64..10.0, extra in 1e-3f64..10.0, s in 0.1f64..5.0) {
        let cov = SMatrix::<f64, 3, 3>::identity() * s;
        let near = kinematic_increment(&Vector3::new(r1, 0.0, 0.0), &cov, 2e4).unwrap();
        let far = kinematic_increment(&Vector3::new(r1 + extra, 0.0, 0.0), &cov, 2e4).unwrap();
        prop_assert!(far < near);
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    v.iter().map(|x| x / n).collect()
}

proptest! {
    #[test]
    fn similarity_ignores_candidate_order(
        q in prop::collection::vec(finite(1.0), 4),
        cands in prop::collection::vec(prop::collection::vec(finite(1.0), 4), 1..6),
        seed in any::<u64>(),
    ) {
        let q = unit(&q);
        let cands: Vec<Vec<f64>> = cands.iter().map(|c| unit(c)).collect();
        let refs: Vec<&[f64]> = cands.iter().map(Vec::as_slice).collect();
        let mut shuffled = refs.clone();
        let n = shuffled.len();
        shuffled.rotate_left((seed as usize) % n);
        shuffled.reverse();
        let a = similarity_increment(&q, refs[0], &refs);
        let b = similarity_increment(&q, refs[0], &shuffled);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn distractors_never_raise_similarity(
        q in prop::collection::vec(finite(1.0), 4),
        cands in prop::collection::vec(prop::collection::vec(finite(1.0), 4), 1..6),
        distractor in prop::collection::vec(finite(1.0), 4),
    ) {
        let q = unit(&q);
        let cands: Vec<Vec<f64>> = cands.iter().map(|c| unit(c)).collect();
        let d = unit(&distractor);
        let refs: Vec<&[f64]> = cands.iter().map(Vec::as_slice).collect();
        let mut more = refs.clone();
        more.push(&d);
        prop_assert!(similarity_increment(&q, refs[0], &more) <= similarity_increment(&q, refs[0], &refs));
    }
}

fn det(id: u64, frame: usize, class: ClassLabel, x: f64, y: f64) -> Detection {
    Detection {
        id: DetectionId(id),
        frame_index: frame,
        timestamp: frame as f64 * 0.5,
        class,
        position: Vector3::new(x, y, 0.0),
        yaw: 0.0,
        size: Vector3::new(2.0, 1.0, 1.5),
        velocity: None,
        confidence: 0.8,
        embedding: None,
    }
}

/// Frames of random detections: (class index, x, y) per detection.
fn random_frames() -> impl Strategy<Value = Vec<Vec<(u8, f64, f64)>>> {
    prop::collection::vec(
        prop::collection::vec((0u8..2, finite(40.0), finite(40.0)), 0..6),
        2..9,
    )
}

fn to_dets(frames: &[Vec<(u8, f64, f64)>]) -> Vec<Vec<Detection>> {
    let mut id = 0;
    frames
        .iter()
        .enumerate()
        .map(|(f, ds)| {
            ds.iter()
                .map(|&(c, x, y)| {
                    id += 1;
                    let class = if c == 0 {
                        ClassLabel::Car
                    } else {
                        ClassLabel::Pedestrian
                    };
                    det(id, f, class, x, y)
                })
                .collect()
        })
        .collect()
}

fn gated(window: usize) -> GraphParams {
    GraphParams {
        window_length: window,
        dormant_horizon: 0,
        gates: Some(Gates::from_config(&TrackerConfig::default())),
    }
}

type EdgeSet = BTreeSet<(u64, u64)>;

fn snapshot(g: &AssociationGraph) -> (BTreeSet<u64>, EdgeSet) {
    let det_of = |n| g.node(n).unwrap().detection.id.0;
    let nodes = g.nodes().map(|n| n.detection.id.0).collect();
    let edges = g
        .edges()
        .iter()
        .map(|e| (det_of(e.from), det_of(e.to)))
        .collect();
    (nodes, edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn graph_invariants_hold_online(frames in random_frames(), window in 2usize..5) {
        let frames = to_dets(&frames);
        let params = gated(window);
        let gates = params.gates.clone().unwrap();
        let mut g = AssociationGraph::new(params.clone());
        for (k, dets) in frames.iter().enumerate() {
            g.contract_window(k, &HashSet::new());
            g.expand_frame(k, dets.clone()).unwrap();
            g.verify().unwrap();

            let sizes: Vec<u64> = g.layer_sizes().iter().map(|&(_, n)| n as u64).collect();
            prop_assert_eq!(g.order() as u64, sizes.iter().sum::<u64>());
            let cross: u64 = (0..sizes.len()).flat_map(|i| (i + 1..sizes.len()).map(move |j| (i, j)))
                .map(|(i, j)| sizes[i] * sizes[j]).sum();
            prop_assert!(g.size() as u64 <= cross);
            for e in g.edges() {
                let a = &g.node(e.from).unwrap().detection;
                let b = &g.node(e.to).unwrap().detection;
                prop_assert!(a.frame_index < b.frame_index);
                prop_assert!(gates.admits(a, b).unwrap());
            }

            // The same window assembled from scratch.
            let lo = k.saturating_sub(window);
            let mut fresh = AssociationGraph::new(params.clone());
            for (j, d) in frames.iter().enumerate().take(k + 1).skip(lo) {
                fresh.expand_frame(j, d.clone()).unwrap();
            }
            prop_assert_eq!(snapshot(&g), snapshot(&fresh));
        }
    }

    #[test]
    fn hypotheses_follow_edges_and_respect_the_bound(frames in random_frames(), m in 1usize..6) {
        let frames = to_dets(&frames);
        let config = TrackerConfig::default();
        let scorer = HypothesisScorer::new(&config);
        let mut g = AssociationGraph::new(gated(3));
        let mut map = HypothesisMap::new();
        for (k, dets) in frames.iter().enumerate() {
            g.contract_window(k, &HashSet::new());
            map.contract(&g);
            g.expand_frame(k, dets.clone()).unwrap();
            map = map.branch_on_frame(&g, k, &scorer, BranchLimits { max_trailing_skips: 4 }).unwrap();
            map.verify(&g).unwrap();
            let roots = g.layer(k).len();
            map.prune_m_best(m, roots);
            map.verify(&g).unwrap();
            prop_assert!(map.len() <= roots * m);
        }
    }

    #[test]
    fn hypothesis_map_is_deterministic(frames in random_frames()) {
        let frames = to_dets(&frames);
        let run = || {
            let config = TrackerConfig::default();
            let scorer = HypothesisScorer::new(&config);
            let mut g = AssociationGraph::new(gated(3));
            let mut map = HypothesisMap::new();
            for (k, dets) in frames.iter().enumerate() {
                g.contract_window(k, &HashSet::new());
                map.contract(&g);
                g.expand_frame(k, dets.clone()).unwrap();
                map = map.branch_on_frame(&g, k, &scorer, BranchLimits { max_trailing_skips: 4 }).unwrap();
                map.prune_m_best(5, g.layer(k).len());
            }
            map.rows.iter().map(|r| (r.entries.clone(), r.score.to_bits())).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}

fn packing_instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<usize>>, usize)> {
    (1usize..12, 1usize..18).prop_flat_map(|(rows, cols)| {
        (
            prop::collection::vec(-5.0f64..20.0, cols),
            prop::collection::vec(prop::collection::btree_set(0..rows, 1..4), cols),
            Just(rows),
        )
            .prop_map(|(c, a, rows)| {
                (
                    c,
                    a.into_iter().map(|s| s.into_iter().collect()).collect(),
                    rows,
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solver_matches_the_oracle((costs, cols, rows) in packing_instance()) {
        let p = AssignmentProblem::from_columns(costs, cols, rows).unwrap();
        let s = assignment::solve(&p, 1_000_000).unwrap();
        let o = brute_force_oracle(&p).unwrap();
        prop_assert!(p.is_feasible(&s.selected));
        prop_assert!((s.objective - o.objective).abs() <= 1e-9, "{} vs {}", s.objective, o.objective);
        prop_assert!((p.objective_of(&s.selected) - s.objective).abs() <= 1e-9);
    }

    #[test]
    fn dropping_an_unselected_column_keeps_the_objective((costs, cols, rows) in packing_instance(), pick in any::<prop::sample::Index>()) {
        let p = AssignmentProblem::from_columns(costs.clone(), cols.clone(), rows).unwrap();
        let s = assignment::solve(&p, 1_000_000).unwrap();
        let unused: Vec<usize> = (0..costs.len()).filter(|j| !s.selected.contains(j)).collect();
        prop_assume!(!unused.is_empty());
        let drop = unused[pick.index(unused.len())];
        let keep: Vec<usize> = (0..costs.len()).filter(|&j| j != drop).collect();
        let q = AssignmentProblem::from_columns(
            keep.iter().map(|&j| costs[j]).collect(),
            keep.iter().map(|&j| cols[j].clone()).collect(),
            rows,
        ).unwrap();
        let t = assignment::solve(&q, 1_000_000).unwrap();
        prop_assert!((t.objective - s.objective).abs() <= 1e-9);
    }
}

fn output(id: u64, x: f64, y: f64) -> TrackOutput {
    TrackOutput {
        frame_index: 0,
        timestamp: 0.0,
        track_id: TrackId(id),
        class: ClassLabel::Car,
        position: Vector3::new(x, y, 0.0),
        yaw: 0.0,
        size: Vector3::new(4.0, 2.0, 1.5),
        velocity: Vector3::zeros(),
        score: 0.5,
        coasted: false,
        detection_id: None,
    }
}

fn truth(id: u64, x: f64, y: f64) -> GroundTruthRecord {
    GroundTruthRecord {
        frame_index: 0,
        timestamp: 0.0,
        gt_track_id: id,
        class: ClassLabel::Car,
        position: Vector3::new(x, y, 0.0),
        yaw: 0.0,
        size: Vector3::new(4.0, 2.0, 1.5),
    }
}

fn grid_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    // Coarse grid so exact distance ties actually occur.
    prop::collection::vec(
        (0i32..6, 0i32..6).prop_map(|(a, b)| (a as f64, b as f64)),
        0..8,
    )
}

proptest! {
    #[test]
    fn frame_matching_ignores_input_order(outs in grid_points(), gts in grid_points(), rot in 0usize..8) {
        let o: Vec<TrackOutput> = outs.iter().enumerate().map(|(i, &(x, y))| output(i as u64, x, y)).collect();
        let g: Vec<GroundTruthRecord> = gts.iter().enumerate().map(|(i, &(x, y))| truth(i as u64, x, y)).collect();
        let mut o2 = o.clone();
        let mut g2 = g.clone();
        o2.reverse();
        g2.reverse();
        if !o2.is_empty() { let n = o2.len(); o2.rotate_left(rot % n); }
        if !g2.is_empty() { let n = g2.len(); g2.rotate_left(rot % n); }
        let a = match_frame(&o, &g, 2.0, &mut HashMap::new());
        let b = match_frame(&o2, &g2, 2.0, &mut HashMap::new());
        let mut ma = a.matches.clone();
        let mut mb = b.matches.clone();
        ma.sort();
        mb.sort();
        prop_assert_eq!(ma, mb);
        prop_assert_eq!(a.counts, b.counts);
        prop_assert_eq!(a.counts.gt, a.counts.matches + a.counts.fn_);
    }

    #[test]
    fn amota_rewards_fewer_errors(
        base in prop::collection::vec((0usize..30, 0usize..30, 0usize..10), 1..6),
        which in any::<prop::sample::Index>(),
        field in 0usize..3,
    ) {
        let gt = 40;
        let l = base.len();
        let sweep = |levels: &[(usize, usize, usize)]| -> f64 {
            let s: Vec<RecallLevel> = levels.iter().enumerate().map(|(i, &(fp, fn_, ids))| {
                let r = (i + 1) as f64 / l as f64;
                let c = ErrorCounts { gt, matches: gt - fn_.min(gt), fp, fn_, ids };
                RecallLevel { recall: r, threshold: Some(0.5), counts: Some(c), term: recall_term(r, &c, gt).unwrap() }
            }).collect();
            amota(&s).unwrap()
        };
        let mut better = base.clone();
        let i = which.index(l);
        match field {
            0 => better[i].0 = better[i].0.saturating_sub(1),
            1 => better[i].1 = better[i].1.saturating_sub(1),
            _ => better[i].2 = better[i].2.saturating_sub(1),
        }
        prop_assert!(sweep(&better) >= sweep(&base));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulated_detections_are_accountable(seed in any::<u64>(), clutter in 0.0f64..8.0, dropout in 0.0f64..0.5) {
        let spec = ScenarioSpec {
            seed,
            duration_frames: 12,
            random_objects: [("car".to_string(), 4), ("pedestrian".to_string(), 4)].into(),
            clutter_rate: clutter,
            dropout_prob: dropout,
            random_occlusions_per_object: 1,
            ..Default::default()
        };
        let scene = sim::generate(&spec).unwrap();
        prop_assert_eq!(scene.detections.len(), scene.detection_sources.len());
        for &(f, t) in &scene.frames {
            let gt_ids: HashSet<u64> = scene.ground_truth.iter().filter(|g| g.frame_index == f).map(|g| g.gt_track_id).collect();
            let mut seen = HashSet::new();
            for (d, src) in scene.detections.iter().zip(&scene.detection_sources) {
                if d.frame_index != f {
                    continue;
                }
                prop_assert_eq!(d.timestamp, t);
                if let Some(g) = src {
                    prop_assert!(gt_ids.contains(g));
                    prop_assert!(seen.insert(*g), "object {} detected twice", g);
                }
            }
        }
        prop_assert_eq!(sim::generate(&spec).unwrap(), scene);
    }

    #[test]
    fn tracker_ids_and_detections_are_exclusive(seed in 0u64..1000) {
        let mut spec = sim::preset_ablation_scene(seed);
        spec.duration_frames = 15;
        let scene = sim::generate(&spec).unwrap();
        let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
        let mut by_frame: HashMap<usize, Vec<Detection>> = HashMap::new();
        for d in &scene.detections {
            by_frame.entry(d.frame_index).or_default().push(d.clone());
        }
        let mut dead: HashSet<TrackId> = HashSet::new();
        for &(f, t) in &scene.frames {
            let out = tracker.step(f, t, by_frame.remove(&f).unwrap_or_default()).unwrap();
            let mut used = HashSet::new();
            let mut ids = HashSet::new();
            for o in &out.tracks {
                prop_assert!(!dead.contains(&o.track_id), "track {} reused in frame {}", o.track_id, f);
                prop_assert!(ids.insert(o.track_id), "track {} twice in frame {}", o.track_id, f);
                if let Some(d) = o.detection_id {
                    prop_assert!(used.insert(d), "detection {:?} used twice", d);
                }
                let rec = TrackRecord::from_output("s", o);
                prop_assert_eq!(rec.to_output().track_id, o.track_id);
            }
            dead.extend(tracker.tracks().tracks().filter(|t| !t.status.is_alive()).map(|t| t.id));
        }
    }
}

#[test]
fn dense_counts_match_the_layer_formula() {
    let c = dense_counts(&[3, 4, 5]);
    assert_eq!(c.order, 12);
    assert_eq!(c.size, 3 * 4 + 3 * 5 + 4 * 5);
}

#[test]
fn position_noise_matches_its_sigma() {
    let spec = ScenarioSpec {
        seed: 11,
        duration_frames: 250,
        random_objects: [("car".to_string(), 50)].into(),
        position_noise_std_m: 0.3,
        region_min_m: [-2000.0, -2000.0, -1.0],
        region_max_m: [2000.0, 2000.0, 3.0],
        ..Default::default()
    };
    let scene = sim::generate(&spec).unwrap();
    let truth: HashMap<(usize, u64), Vector3<f64>> = scene
        .ground_truth
        .iter()
        .map(|g| ((g.frame_index, g.gt_track_id), g.position))
        .collect();
    let mut errs = Vec::new();
    for (d, src) in scene.detections.iter().zip(&scene.detection_sources) {
        let Some(g) = src else { continue };
        let e = d.position - truth[&(d.frame_index, *g)];
        errs.extend([e.x, e.y, e.z]);
    }
    assert!(errs.len() >= 10_000, "{} samples", errs.len());
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((sd - 0.3).abs() <= 0.05 * 0.3, "sd {sd}");
}
