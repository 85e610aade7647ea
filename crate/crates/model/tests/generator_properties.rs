mod common;

use proptest::prelude::*;

use scengen_core::code::Orientation;
use scengen_core::scenario::{LaneSegment, LaneType, MapRegion};
use scengen_core::synthetic::fixture_dataset;
use scengen_core::Point;
use scengen_model::features::{positional_encoding, LaneFeatureInput};
use scengen_model::generator::{Attribute, GeneratorConfig, GeneratorOutput, GmmParams};
use scengen_model::graph::Graph;
use scengen_model::tensor::Tensor;
use scengen_model::{Generator64, ModelError};

fn small() -> GeneratorConfig {
    GeneratorConfig { d: 16, attribute_mlp_width: 32, max_lanes: 384, max_agents: 8, horizon: 50, ..GeneratorConfig::default() }
}

/// Set both MLPs of MCG block 0 to identity weights with zero bias.
fn identity_block(model: &mut Generator64) {
    let d = model.config().d;
    for branch in ["element", "context"] {
        for layer in 0..2 {
            let w = model.params().find(&format!("map.mcg0.{branch}.{layer}.weight")).unwrap();
            *model.params_mut().get_mut(w) = Tensor::identity(d);
            let b = model.params().find(&format!("map.mcg0.{branch}.{layer}.bias")).unwrap();
            *model.params_mut().get_mut(b) = Tensor::zeros(1, d);
        }
    }
}

#[test]
fn identity_gate_is_row_times_column_max() {
    let mut model = Generator64::new(GeneratorConfig::miniature(), 3).unwrap();
    identity_block(&mut model);
    let rows = [[1.0, 4.0, 0.5, 2.0, 3.0, 0.25, 1.0, 6.0], [2.0, 1.0, 0.5, 3.0, 1.0, 0.75, 5.0, 2.0]];
    // Column maxima of the two rows, then each row times them.
    let max = [2.0, 4.0, 0.5, 3.0, 3.0, 0.75, 5.0, 6.0];
    let expected = [
        [2.0, 16.0, 0.25, 6.0, 9.0, 0.1875, 5.0, 36.0],
        [4.0, 4.0, 0.25, 9.0, 3.0, 0.5625, 25.0, 12.0],
    ];
    for (r, e) in expected.iter().enumerate() {
        for c in 0..8 {
            assert_eq!(rows[r][c] * max[c], e[c]);
        }
    }
    let mut g = Graph::new(model.params());
    let v = g.constant(Tensor::from_vec(2, 8, rows.concat()));
    let out = model.mcg_gate(&mut g, 0, v, None);
    assert_eq!(g.value(out).data, expected.concat());
}

#[test]
fn single_row_context_is_the_row_itself() {
    let mut model = Generator64::new(GeneratorConfig::miniature(), 3).unwrap();
    identity_block(&mut model);
    let row = vec![0.5, 1.0, 2.0, 3.0, 0.1, 0.2, 4.0, 1.5];
    let mut g = Graph::new(model.params());
    let v = g.constant(Tensor::from_vec(1, 8, row.clone()));
    let pooled = g.max_pool_rows(v, None);
    assert_eq!(g.value(pooled).data, row);
    let out = model.mcg_gate(&mut g, 0, v, None);
    assert_eq!(g.value(out).data, row.iter().map(|x| x * x).collect::<Vec<_>>());
}

#[test]
fn duplicate_lanes_get_identical_features() {
    let model = Generator64::new(small(), 5).unwrap();
    let mut map = common::parallel_map(5);
    let mut copy = map.lanes[1].clone();
    copy.id = 99;
    map.lanes.push(copy);
    let lanes = model.lane_input(&map);
    let mut g = Graph::new(model.params());
    let f = model.encode_map(&mut g, &lanes).unwrap();
    let f = g.value(f);
    assert_eq!(f.row(1), f.row(5));
    assert_ne!(f.row(1), f.row(2));
}

fn permuted(map: &MapRegion, order: &[usize]) -> MapRegion {
    MapRegion { lanes: order.iter().map(|&i| map.lanes[i].clone()).collect(), ..map.clone() }
}

#[test]
fn lane_permutation_permutes_features_and_placement() {
    let scene = fixture_dataset()[2].canonical().unwrap();
    let code = scengen_core::encoder::encode_scenario(&scene, &scengen_core::code::DistanceBinning::GENERATION).unwrap();
    let model = Generator64::new(small(), 9).unwrap();
    let n = scene.map.lanes.len();
    let order: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
    assert_eq!({ let mut o = order.clone(); o.sort(); o }, (0..n).collect::<Vec<_>>());
    let shuffled = permuted(&scene.map, &order);

    let (a, b) = (model.lane_input(&scene.map), model.lane_input(&shuffled));
    let mut g = Graph::new(model.params());
    let fa = model.encode_map(&mut g, &a).unwrap();
    let fb = model.encode_map(&mut g, &b).unwrap();
    for (j, &i) in order.iter().enumerate() {
        assert_eq!(g.value(fa).row(i), g.value(fb).row(j), "lane {i}");
    }

    let oa = model.infer(&a, &code).unwrap();
    let ob = model.infer(&b, &code).unwrap();
    for agent in 0..code.agents.len() {
        for (j, &i) in order.iter().enumerate() {
            let (pa, pb) = (oa.lane_probs.get(agent, i), ob.lane_probs.get(agent, j));
            assert!((pa - pb).abs() < 1e-12, "agent {agent} lane {i}: {pa} vs {pb}");
        }
    }
    let (sa, _) = model.generate(&code, &scene.map).unwrap();
    let (sb, _) = model.generate(&code, &shuffled).unwrap();
    for (x, y) in sa.agents.iter().zip(&sb.agents) {
        for (s, t) in x.states.iter().zip(&y.states) {
            assert!(s.position.distance(t.position) < 1e-9);
            assert!((s.heading - t.heading).abs() < 1e-9);
        }
    }
}

#[test]
fn all_masked_or_oversized_maps_are_rejected() {
    let model = Generator64::new(small(), 1).unwrap();
    let mut lanes = model.lane_input(&common::parallel_map(3));
    lanes.mask.iter_mut().for_each(|m| *m = false);
    let mut g = Graph::new(model.params());
    assert!(matches!(model.encode_map(&mut g, &lanes), Err(ModelError::EmptyMap)));
    let none = LaneFeatureInput { rows: vec![], mask: vec![] };
    assert!(matches!(model.encode_map(&mut g, &none), Err(ModelError::EmptyMap)));
    let many = model.lane_input(&common::parallel_map(3)).padded(385);
    assert!(matches!(model.encode_map(&mut g, &many), Err(ModelError::Config(_))));
}

#[test]
fn fixture_map_features_match_frozen_checksum() {
    let model = Generator64::new(GeneratorConfig::default(), 2024).unwrap();
    let scene = fixture_dataset()[0].canonical().unwrap();
    let lanes = model.lane_input(&scene.map);
    let mut g = Graph::new(model.params());
    let f = model.encode_map(&mut g, &lanes).unwrap();
    let f = g.value(f);
    let cubic: f64 = f.data.iter().map(|v| v * v * v).sum();
    let weighted: f64 = f.data.iter().enumerate().map(|(i, v)| v * ((i % 97) as f64 + 1.0)).sum();
    assert_eq!(f.shape(), (112, 256));
    let (want_cubic, want_weighted): (f64, f64) = (1.381200501993e3, 1.817191485528e2);
    assert!((cubic - want_cubic).abs() < 1e-8 * want_cubic.abs().max(1.0), "cubic {cubic:e}");
    assert!((weighted - want_weighted).abs() < 1e-8 * want_weighted.abs().max(1.0), "weighted {weighted:e}");
}

#[test]
fn queries_differ_by_slot_and_repeat_exactly() {
    let model = Generator64::new(small(), 4).unwrap();
    let same = common::agent(1, 1, Orientation::North, 3);
    let code = common::code(vec![same, same]);
    let mut g = Graph::new(model.params());
    let q = model.build_queries(&mut g, &code).unwrap();
    let q2 = model.build_queries(&mut g, &code).unwrap();
    assert_ne!(g.value(q).row(0), g.value(q).row(1));
    assert_eq!(g.value(q).data, g.value(q2).data);
    let too_many = common::code(vec![same; 9]);
    assert!(model.build_queries(&mut g, &too_many).is_err());
}

#[test]
fn positional_encoding_of_zero_code() {
    let pe = positional_encoding(&[0; 8], 2);
    assert_eq!(pe.len(), 32);
    for pair in pe.chunks(2) {
        assert_eq!(pair, [0.0, 1.0]);
    }
}

#[test]
fn identical_lanes_give_uniform_placement_and_padding_gets_zero() {
    let model = Generator64::new(small(), 6).unwrap();
    let lane = LaneSegment::new(1, Point::new(-5.0, 0.0), Point::new(5.0, 0.0), LaneType::Center);
    let map = MapRegion {
        region_id: "r".into(),
        center: Point::new(0.0, 0.0),
        lanes: (0..4).map(|i| LaneSegment { id: i, ..lane.clone() }).collect(),
    };
    let lanes = model.lane_input(&map).padded(7);
    let out = model.infer(&lanes, &common::miniature_code()).unwrap();
    for i in 0..2 {
        for j in 0..4 {
            assert!((out.lane_probs.get(i, j) - 0.25).abs() < 1e-12);
        }
        for j in 4..7 {
            assert_eq!(out.lane_probs.get(i, j), 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn categorical_outputs_normalize(seed in 0u64..1000, gain in 0.1f64..50.0, lanes in 1usize..4, agents in 1usize..3) {
        let mut model = Generator64::new(GeneratorConfig::miniature(), seed).unwrap();
        for e in model.params_mut().entries_mut() {
            e.value.scale_assign(gain);
        }
        let code = common::code((0..agents).map(|i| common::agent(1 + i as u8, i as u32, Orientation::ALL[i % 4], 2)).collect());
        let input = model.lane_input(&common::parallel_map(lanes)).padded(4);
        let out = model.infer(&input, &code).unwrap();
        for i in 0..agents {
            let placement: f64 = out.lane_probs.row(i).iter().sum();
            prop_assert!((placement - 1.0).abs() < 1e-6);
            prop_assert!(out.lane_probs.row(i)[lanes..].iter().all(|&p| p == 0.0));
            let modes: f64 = out.mode_probs.row(i).iter().sum();
            prop_assert!((modes - 1.0).abs() < 1e-6);
            for a in &out.attributes {
                let w: f64 = a.weights.row(i).iter().sum();
                prop_assert!((w - 1.0).abs() < 1e-6);
                prop_assert!(a.variances.row(i).iter().all(|&v| v > 0.0));
            }
        }
    }
}

#[test]
fn inference_is_bit_identical_and_agent_count_preserved() {
    let model = Generator64::new(small(), 8).unwrap();
    for scene in fixture_dataset() {
        let scene = scene.canonical().unwrap();
        let code = scengen_core::encoder::encode_scenario(&scene, &scengen_core::code::DistanceBinning::GENERATION).unwrap();
        let lanes = model.lane_input(&scene.map);
        assert_eq!(model.infer(&lanes, &code).unwrap(), model.infer(&lanes, &code).unwrap());
        let (generated, _) = model.generate(&code, &scene.map).unwrap();
        assert_eq!(generated.agents.len(), code.agents.len());
        assert_eq!(generated.horizon(), 50);
    }
}

/// A hand-built output over `map` for `n` agents: one-hot placement and dominant components.
fn hand_output(n: usize, lanes: usize, lane: usize, step: f64, shift: [f64; 2]) -> GeneratorOutput {
    let horizon = 50;
    let (k, modes) = (2, 2);
    let mut lane_probs = Tensor::zeros(n, lanes);
    let mut attributes = Vec::new();
    for a in Attribute::ALL {
        let d = a.dim();
        let mut means = Tensor::zeros(n, k * d);
        let mut weights = Tensor::zeros(n, k);
        for i in 0..n {
            let dominant: Vec<f64> = match a {
                Attribute::Heading => vec![0.2],
                Attribute::Speed => vec![5.0],
                Attribute::Size => vec![4.8, 2.0],
                Attribute::Shift => shift.to_vec(),
            };
            for j in 0..d {
                means.set(i, j, -7.0);
                means.set(i, d + j, dominant[j]);
            }
            weights.set(i, 0, 0.01);
            weights.set(i, 1, 0.99);
        }
        attributes.push(GmmParams { dim: d, components: k, means, variances: Tensor::filled(n, k * d, 1.0), weights });
    }
    let len = (horizon - 1) * 3;
    let mut trajectories = Tensor::zeros(n, modes * len);
    let mut mode_probs = Tensor::zeros(n, modes);
    for i in 0..n {
        lane_probs.set(i, lane, 1.0);
        for t in 0..horizon - 1 {
            trajectories.set(i, t * 3, -1.0);
            trajectories.set(i, len + t * 3, step * (t + 1) as f64);
        }
        mode_probs.set(i, 0, 0.3);
        mode_probs.set(i, 1, 0.7);
    }
    GeneratorOutput {
        lane_probs,
        attributes,
        trajectories,
        mode_probs,
        lane_embeddings: Tensor::zeros(lanes, 1),
        agent_embeddings: Tensor::zeros(n, 1),
        horizon,
    }
}

#[test]
fn sampling_takes_dominant_component_lane_midpoint_and_finite_difference_speed() {
    use scengen_model::generator::sample_scenario;
    let map = common::parallel_map(4);
    let code = common::miniature_code();
    let out = hand_output(2, 4, 1, 0.5, [0.0, 0.0]);
    let (scene, warnings) = sample_scenario(&out, &code, &map).unwrap();
    assert!(warnings.is_empty());
    let lane = &map.lanes[1];
    for agent in &scene.agents {
        let first = agent.states[0];
        assert_eq!(first.position, lane.midpoint());
        assert!((first.heading - (lane.heading() + 0.2)).abs() < 1e-12);
        assert_eq!((agent.length, agent.width), (4.8, 2.0));
        assert_eq!(agent.states.len(), 50);
        for s in &agent.states {
            assert!((s.speed - 5.0).abs() < 1e-9, "speed {}", s.speed);
        }
        let last = agent.states[49].position;
        assert!((last.distance(first.position) - 24.5).abs() < 1e-9);
    }

    let shifted = hand_output(2, 4, 1, 0.5, [2.0, 1.0]);
    let (scene, _) = sample_scenario(&shifted, &code, &map).unwrap();
    let u = lane.direction() * (1.0 / lane.length());
    let want = lane.midpoint() + u * 2.0 + u.perp();
    assert!(scene.agents[0].states[0].position.distance(want) < 1e-12);
}

#[test]
fn degenerate_lane_falls_back_to_start_point() {
    use scengen_model::generator::sample_scenario;
    let mut map = common::parallel_map(2);
    map.lanes[0].end = map.lanes[0].start + Point::new(1e-9, 0.0);
    let out = hand_output(2, 2, 0, 0.5, [3.0, 3.0]);
    let (scene, warnings) = sample_scenario(&out, &common::miniature_code(), &map).unwrap();
    assert_eq!(warnings.len(), 2);
    assert_eq!(scene.agents[0].states[0].position, map.lanes[0].start);
}

#[test]
fn sampling_rejects_mismatched_shapes() {
    use scengen_model::generator::sample_scenario;
    let map = common::parallel_map(4);
    let out = hand_output(3, 4, 0, 0.5, [0.0, 0.0]);
    assert!(sample_scenario(&out, &common::miniature_code(), &map).is_err());
    let out = hand_output(2, 3, 0, 0.5, [0.0, 0.0]);
    assert!(sample_scenario(&out, &common::miniature_code(), &map).is_err());
}
