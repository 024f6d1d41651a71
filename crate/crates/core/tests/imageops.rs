use changeforge_core::imageops::{
    add_gaussian_noise, color_jitter, composite, crop_rect, feather_mask, feather_radius, rotate_patch,
};
use changeforge_core::{Patch, Rect, RgbImage, SoftMask};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeded_image(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..w * h * 3).map(|_| rng.random::<u8>()).collect();
    RgbImage::from_raw(w, h, data).unwrap()
}

fn gradient(w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| [(x * 3 % 256) as u8, (y * 5 % 256) as u8, ((x + 2 * y) % 256) as u8]).unwrap()
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

#[test]
fn crop_checksum_matches_direct_copy() {
    let src = gradient(128, 96);
    let patch = crop_rect(&src, Rect::new(5, 5, 64, 32)).unwrap();
    let raw = src.as_raw();
    let mut expected = Vec::new();
    for y in 5..37usize {
        let start = (y * 128 + 5) * 3;
        expected.extend_from_slice(&raw[start..start + 64 * 3]);
    }
    assert_eq!(fnv1a(patch.image().as_raw().iter().copied()), fnv1a(expected));
    assert!(patch.mask().as_slice().iter().all(|&a| a == 1.0));
}

// Fraction of 16x16 subsamples per output pixel that map back inside the
// source rectangle, summed over the output.
fn supersampled_area(w: u32, h: u32, ow: u32, oh: u32, angle_deg: f64) -> f64 {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let n = 16;
    let mut hits = 0u64;
    for oy in 0..oh {
        for ox in 0..ow {
            for j in 0..n {
                for i in 0..n {
                    let x = ox as f64 + (i as f64 + 0.5) / n as f64 - ow as f64 / 2.0;
                    let y = oy as f64 + (j as f64 + 0.5) / n as f64 - oh as f64 / 2.0;
                    let sx = w as f64 / 2.0 + c * x - s * y;
                    let sy = h as f64 / 2.0 + s * x + c * y;
                    if (0.0..w as f64).contains(&sx) && (0.0..h as f64).contains(&sy) {
                        hits += 1;
                    }
                }
            }
        }
    }
    hits as f64 / (n * n) as f64
}

#[test]
fn rotation_preserves_support_area() {
    let p = Patch::opaque(seeded_image(60, 40, 7));
    let r = rotate_patch(&p, 37.0);
    let oracle = supersampled_area(60, 40, r.width(), r.height(), 37.0);
    assert!((oracle / 2400.0 - 1.0).abs() < 0.005, "oracle {oracle}");
    let support = r.mask().support_area() as f64;
    assert!((support / oracle - 1.0).abs() <= 0.02, "support {support} oracle {oracle}");
}

#[test]
fn step_edge_feathers_to_half() {
    let (w, h) = (32u32, 16u32);
    let alpha: Vec<f32> = (0..w * h).map(|i| if i % w < 16 { 1.0 } else { 0.0 }).collect();
    let m = SoftMask::from_raw(w, h, alpha.clone()).unwrap();
    let out = feather_mask(&m, 1.0).unwrap();

    // direct 2-D convolution with clamped borders
    let r = 3i64;
    let weights: Vec<f64> = (-r..=r).map(|d| (-(d * d) as f64 / 2.0).exp()).collect();
    let norm: f64 = weights.iter().sum::<f64>().powi(2);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w as i64 - 1);
                    let sy = (y + dy).clamp(0, h as i64 - 1);
                    acc += weights[(dx + r) as usize] * weights[(dy + r) as usize]
                        * alpha[(sy * w as i64 + sx) as usize] as f64;
                }
            }
            let got = out.get(x as u32, y as u32) as f64;
            assert!((got - acc / norm).abs() < 1e-6, "({x},{y}) {got} vs {}", acc / norm);
        }
    }
    // the edge lies between columns 15 and 16
    let edge = (out.get(15, 8) as f64 + out.get(16, 8) as f64) / 2.0;
    assert!((edge - 0.5).abs() < 0.02, "{edge}");
}

#[test]
fn noise_statistics() {
    let img = RgbImage::new(512, 512, [128; 3]).unwrap();
    let noisy = add_gaussian_noise(&img, 5.0, 2024).unwrap();
    let vals: Vec<f64> = noisy.as_raw().iter().map(|&v| v as f64).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    assert!((mean - 128.0).abs() < 0.5, "mean {mean}");
    assert!((var.sqrt() - 5.0).abs() < 0.5, "std {}", var.sqrt());
    assert_eq!(noisy, add_gaussian_noise(&img, 5.0, 2024).unwrap());
    assert_ne!(noisy, add_gaussian_noise(&img, 5.0, 2025).unwrap());
}

#[test]
fn jitter_scales_channel_means() {
    let img = seeded_image(128, 128, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let means = |im: &RgbImage| -> [f64; 3] {
        let mut m = [0.0; 3];
        for px in im.as_raw().chunks_exact(3) {
            for k in 0..3 {
                m[k] += px[k] as f64;
            }
        }
        m.map(|v| v / (im.width() * im.height()) as f64)
    };
    let before = means(&img);
    for _ in 0..20 {
        let gains: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.9..=1.1));
        let after = means(&color_jitter(&img, gains).unwrap());
        for k in 0..3 {
            let ratio = after[k] / before[k];
            assert!((ratio / gains[k] - 1.0).abs() < 0.01, "channel {k}: {ratio} vs {}", gains[k]);
        }
    }
}

fn blob(w: u32, h: u32, border: u32, seed: u64) -> SoftMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let inner = x >= border && y >= border && x < w - border && y < h - border;
            if inner && rng.random_bool(0.7) {
                rng.random_range(0.2f32..=1.0)
            } else {
                0.0
            }
        })
        .collect();
    SoftMask::from_raw(w, h, alpha).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feather_keeps_mass_away_from_borders(sigma in 0.3f64..3.0, seed in any::<u64>()) {
        let border = feather_radius(sigma) + 1;
        let m = blob(24 + 2 * border, 20 + 2 * border, border, seed);
        let f = feather_mask(&m, sigma).unwrap();
        prop_assert!((f.mass() / m.mass() - 1.0).abs() < 0.01);
        prop_assert!(f.as_slice().iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn composite_leaves_outside_untouched(
        seed in any::<u64>(),
        x in -8i64..40,
        y in -8i64..40,
        sigma in 0.0f64..2.0,
    ) {
        let bg = seeded_image(64, 64, seed);
        let m = feather_mask(&blob(24, 24, 4, seed ^ 1), sigma).unwrap();
        let p = Patch::new(seeded_image(24, 24, seed ^ 2), m).unwrap();
        match composite(&bg, &p, (x, y)) {
            Ok((out, rect)) => {
                for py in 0..64 {
                    for px in 0..64 {
                        let (lx, ly) = (px as i64 - x, py as i64 - y);
                        let inside = (0..24).contains(&lx) && (0..24).contains(&ly)
                            && p.mask().get(lx as u32, ly as u32) > 0.0;
                        if !inside {
                            prop_assert_eq!(out.get(px, py), bg.get(px, py));
                        } else {
                            prop_assert!(rect.contains_point(px, py));
                        }
                    }
                }
            }
            Err(e) => prop_assert!(matches!(e, changeforge_core::Error::Placement)),
        }
    }

    #[test]
    fn quarter_turns_are_lossless(w in 1u32..12, h in 1u32..12, seed in any::<u64>(), turns in 1u32..4) {
        let p = Patch::opaque(seeded_image(w, h, seed));
        let r = rotate_patch(&p, 90.0 * turns as f64);
        let back = rotate_patch(&r, 90.0 * (4 - turns) as f64);
        prop_assert_eq!(back, p.clone());
        let mut a = p.image().as_raw().to_vec();
        let mut b = r.image().as_raw().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn noise_is_deterministic(seed in any::<u64>(), sigma in 0.0f64..20.0) {
        let img = seeded_image(16, 16, seed);
        prop_assert_eq!(add_gaussian_noise(&img, sigma, seed).unwrap(), add_gaussian_noise(&img, sigma, seed).unwrap());
    }
}
