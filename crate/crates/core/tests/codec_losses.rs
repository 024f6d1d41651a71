use changeforge_core::codec::{decode_maps, encode_targets, peak_collisions, CodecConfig, FeatureMap, TargetMaps};
use changeforge_core::losses::{loss_gradients, total_loss, LossConfig, LossReport};
use changeforge_core::ChangeBox;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn boxes_strategy() -> impl Strategy<Value = Vec<ChangeBox>> {
    // boxes whose area lies in [0.005, 0.5) of a 512x512 input
    let one = (0.005f64..0.499, 0.2f64..5.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(frac, aspect, u, v)| {
        let area = frac * 512.0 * 512.0;
        let w = (area * aspect).sqrt().min(511.0);
        let h = (area / w).min(511.0);
        let cx = w / 2.0 + u * (512.0 - w);
        let cy = h / 2.0 + v * (512.0 - h);
        ChangeBox::new(cx, cy, w, h)
    });
    proptest::collection::vec(one, 1..=5).prop_filter("peak cells at least 2 apart", |bs| {
        let cells: Vec<(i64, i64)> = bs.iter().map(|b| ((b.cx / 4.0) as i64, (b.cy / 4.0) as i64)).collect();
        cells.iter().enumerate().all(|(i, a)| {
            cells[i + 1..].iter().all(|b| (a.0 - b.0).abs().max((a.1 - b.1).abs()) >= 2)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decode_inverts_encode(boxes in boxes_strategy()) {
        let cfg = CodecConfig::default();
        let maps = encode_targets(&boxes, &cfg).unwrap();
        let dets = decode_maps(&maps, &cfg).unwrap();
        prop_assert_eq!(dets.len(), boxes.len());
        for b in &boxes {
            let hit = dets.iter().any(|d| {
                (d.bbox.cx - b.cx).abs() < 1e-6 && (d.bbox.cy - b.cy).abs() < 1e-6
                    && (d.bbox.w - b.w).abs() < 1e-6 && (d.bbox.h - b.h).abs() < 1e-6
            });
            prop_assert!(hit, "box {} not decoded", b);
        }
        prop_assert!(dets.iter().all(|d| d.score == 1.0));
    }

    #[test]
    fn heatmap_is_bounded_with_unit_peaks(boxes in boxes_strategy()) {
        let cfg = CodecConfig::default();
        let maps = encode_targets(&boxes, &cfg).unwrap();
        prop_assert!(maps.hm.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(maps.peak_cells().len(), boxes.len() - peak_collisions(&boxes, &cfg));
        prop_assert!(maps.offset.as_slice().iter().all(|v| (0.0..1.0).contains(v)));
    }
}

#[test]
fn loss_weighting_fixture() {
    let r = LossReport::combine(1.0, 14.0, 0.25, 1, &LossConfig::default());
    assert_eq!(r.total, 2.65);
}

fn random_fixture(res: usize, seed: u64) -> (TargetMaps, TargetMaps) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut target = TargetMaps::zeros(res);
    for v in target.hm.as_mut_slice() {
        *v = if rng.random_bool(0.05) { 1.0 } else { rng.random_range(0.0..0.99) };
    }
    for y in 0..res {
        for x in 0..res {
            if target.hm.get(x, y, 0) == 1.0 {
                target.wh.set(x, y, 0, rng.random_range(4.0..300.0));
                target.wh.set(x, y, 1, rng.random_range(4.0..300.0));
                target.offset.set(x, y, 0, rng.random_range(0.0..1.0));
                target.offset.set(x, y, 1, rng.random_range(0.0..1.0));
            }
        }
    }
    let hm: Vec<f64> = (0..res * res).map(|_| rng.random_range(0.05..0.95)).collect();
    // keep L1 terms at least 0.01 away from their kink
    let away = |rng: &mut ChaCha8Rng, t: f64, spread: f64| {
        let d = rng.random_range(0.01..spread);
        if rng.random_bool(0.5) { t + d } else { t - d }
    };
    let wh: Vec<f64> = target.wh.as_slice().iter().map(|&t| away(&mut rng, t, 20.0)).collect();
    let off: Vec<f64> = target.offset.as_slice().iter().map(|&t| away(&mut rng, t, 0.5)).collect();
    let pred = TargetMaps {
        hm: FeatureMap::from_vec(res, res, 1, hm).unwrap(),
        wh: FeatureMap::from_vec(res, res, 2, wh).unwrap(),
        offset: FeatureMap::from_vec(res, res, 2, off).unwrap(),
    };
    (pred, target)
}

fn maps_mut(m: &mut TargetMaps, which: usize) -> &mut [f64] {
    match which {
        0 => m.hm.as_mut_slice(),
        1 => m.wh.as_mut_slice(),
        _ => m.offset.as_mut_slice(),
    }
}

fn maps_ref(m: &TargetMaps, which: usize) -> &[f64] {
    match which {
        0 => m.hm.as_slice(),
        1 => m.wh.as_slice(),
        _ => m.offset.as_slice(),
    }
}

/// Worst relative error between analytic and central-difference gradients.
pub fn gradient_error(pred: &TargetMaps, target: &TargetMaps, step: f64) -> f64 {
    let cfg = LossConfig::default();
    let analytic = loss_gradients(pred, target, &cfg).unwrap();
    let mut worst = 0.0f64;
    let mut probe = pred.clone();
    for which in 0..3 {
        for i in 0..maps_ref(pred, which).len() {
            let v = maps_ref(pred, which)[i];
            maps_mut(&mut probe, which)[i] = v + step;
            let up = total_loss(&probe, target, &cfg).unwrap().total;
            maps_mut(&mut probe, which)[i] = v - step;
            let down = total_loss(&probe, target, &cfg).unwrap().total;
            maps_mut(&mut probe, which)[i] = v;
            let numeric = (up - down) / (2.0 * step);
            let a = maps_ref(&analytic, which)[i];
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..10 {
        let (pred, target) = random_fixture(12, seed);
        let err = gradient_error(&pred, &target, 1e-4);
        assert!(err <= 1e-4, "seed {seed}: {err}");
    }
}
