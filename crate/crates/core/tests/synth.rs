use glyphpair_core::seed::{self, tag};
use glyphpair_core::synth::{
    degrade_image, generate_pairs, make_pair, render_drawing, shade, DegradationConfig, SynthConfig,
};

fn clean_config() -> SynthConfig {
    SynthConfig {
        extra_unlabeled: 0,
        degradation: DegradationConfig::none(),
        ..SynthConfig::default()
    }
}

#[test]
fn nearest_centroid_separates_clean_drawings() {
    let cfg = clean_config();
    let pairs = generate_pairs(&cfg).unwrap();
    let half = cfg.per_class_labeled / 2;
    let px = cfg.image_size * cfg.image_size;
    let mut centroids = vec![vec![0.0; px]; cfg.num_classes];
    for p in &pairs {
        if p.id[4..].parse::<usize>().unwrap() < half {
            for (c, v) in centroids[p.class_id as usize].iter_mut().zip(&p.drawing) {
                *c += v / half as f64;
            }
        }
    }
    let (mut right, mut total) = (0, 0);
    for p in pairs
        .iter()
        .filter(|p| p.id[4..].parse::<usize>().unwrap() >= half)
    {
        let dist =
            |c: &Vec<f64>| -> f64 { c.iter().zip(&p.drawing).map(|(a, b)| (a - b).powi(2)).sum() };
        let best = (0..cfg.num_classes)
            .min_by(|&a, &b| {
                dist(&centroids[a])
                    .partial_cmp(&dist(&centroids[b]))
                    .unwrap()
            })
            .unwrap();
        right += (best == p.class_id as usize) as usize;
        total += 1;
    }
    let acc = right as f64 / total as f64;
    assert!(acc >= 0.95, "nearest-centroid accuracy {acc}");
}

#[test]
fn half_erosion_removes_about_half_the_ink() {
    let cfg = clean_config();
    let deg = DegradationConfig {
        erosion_strength: 0.5,
        ..DegradationConfig::none()
    };
    // Shaded ink sits at 0.15 on 0.55 stone; the midpoint separates them.
    let dark = |img: &[f64]| img.iter().filter(|v| **v < 0.35).count();
    for s in 0..20u64 {
        let pair = make_pair(&cfg, (s % 10) as u32, s as usize, true);
        let before = dark(&shade(&pair.drawing, cfg.image_size));
        let after = dark(&degrade_image(
            &pair.drawing,
            cfg.image_size,
            &deg,
            1000 + s,
        ));
        let kept = after as f64 / before as f64;
        assert!((0.4..=0.6).contains(&kept), "seed {s}: kept {kept}");
    }
}

#[test]
fn translation_peak_stays_within_the_bound() {
    let cfg = clean_config();
    let size = cfg.image_size;
    let deg = DegradationConfig {
        misalign_translate: 3.0,
        ..DegradationConfig::none()
    };
    for s in 0..10u64 {
        let pair = make_pair(&cfg, s as u32, 0, true);
        let reference = shade(&pair.drawing, size);
        let moved = degrade_image(&pair.drawing, size, &deg, s);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&reference), mean(&moved));
        let mut best = (f64::NEG_INFINITY, 0i64, 0i64);
        for dy in -5i64..=5 {
            for dx in -5i64..=5 {
                let mut acc = 0.0;
                for y in 0..size as i64 {
                    for x in 0..size as i64 {
                        let (sx, sy) = (x - dx, y - dy);
                        if sx < 0 || sy < 0 || sx >= size as i64 || sy >= size as i64 {
                            continue;
                        }
                        acc += (moved[(y * size as i64 + x) as usize] - mb)
                            * (reference[(sy * size as i64 + sx) as usize] - ma);
                    }
                }
                if acc > best.0 {
                    best = (acc, dx, dy);
                }
            }
        }
        assert!(
            best.1.abs() <= 3 && best.2.abs() <= 3,
            "seed {s}: peak at {:?}",
            (best.1, best.2)
        );
    }
}

#[test]
fn zero_degradation_is_plain_shading() {
    let cfg = clean_config();
    let pair = make_pair(&cfg, 2, 5, true);
    assert_eq!(pair.image, shade(&pair.drawing, cfg.image_size));
}

#[test]
fn corpus_is_reproducible_and_drawings_ignore_degradation() {
    let cfg = SynthConfig {
        num_classes: 3,
        per_class_labeled: 4,
        extra_unlabeled: 5,
        image_size: 32,
        degradation: DegradationConfig::heavy_for(32),
        ..SynthConfig::default()
    };
    let a = generate_pairs(&cfg).unwrap();
    assert_eq!(a, generate_pairs(&cfg).unwrap());
    let plain = generate_pairs(&SynthConfig {
        degradation: DegradationConfig::none(),
        ..cfg.clone()
    })
    .unwrap();
    for (x, y) in a.iter().zip(&plain) {
        assert_eq!(x.drawing, y.drawing);
        assert_eq!(x.id, y.id);
    }
    assert!(a.iter().zip(&plain).any(|(x, y)| x.image != y.image));
    let other_seed = generate_pairs(&SynthConfig {
        seed: 8,
        ..cfg.clone()
    })
    .unwrap();
    assert_ne!(a[0].drawing, other_seed[0].drawing);
}

#[test]
fn image_and_drawing_share_the_recorded_glyph() {
    let cfg = SynthConfig {
        num_classes: 3,
        per_class_labeled: 3,
        extra_unlabeled: 3,
        image_size: 32,
        degradation: DegradationConfig::heavy_for(32),
        ..SynthConfig::default()
    };
    for p in generate_pairs(&cfg).unwrap() {
        assert_eq!(p.drawing, render_drawing(&p.glyph, cfg.image_size));
        let image = degrade_image(
            &p.drawing,
            cfg.image_size,
            &cfg.degradation,
            seed::derive(p.pair_seed, &[tag("degrade")]),
        );
        assert_eq!(p.image, image);
        assert!(p.image.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
