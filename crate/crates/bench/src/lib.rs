//! Seeded inputs shared by the benchmarks.

use cornea_core::decode::{Anchor, HeadTensor, NUM_CLASSES, SLOT_LEN};
use cornea_core::synth::{render_scene, SceneParams};
use cornea_core::{BoundingBox, ClassLabel, Detection};
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A `grid x grid` head with three anchors and uniform logits in [-4, 4].
pub fn random_head(grid: usize, seed: u64) -> HeadTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = vec![
        Anchor { w: 40.0, h: 40.0 },
        Anchor { w: 80.0, h: 80.0 },
        Anchor { w: 140.0, h: 120.0 },
    ];
    let n = grid * grid * anchors.len() * SLOT_LEN;
    let values = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
    HeadTensor::new(grid, grid, 256.0 / grid as f64, anchors, NUM_CLASSES, values).expect("valid head")
}

/// `n` detections scattered over a 256x192 frame.
pub fn random_detections(n: usize, seed: u64) -> Vec<Detection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..200.0), rng.random_range(0.0..140.0));
            let (w, h) = (rng.random_range(8.0..56.0), rng.random_range(8.0..52.0));
            let label = ClassLabel::ALL[rng.random_range(0..2)];
            let b = BoundingBox::new(x, y, x + w, y + h).expect("ordered corners");
            Detection::new(b, label, rng.random_range(0.0..1.0), rng.random_range(0.5..1.0)).expect("scores in range")
        })
        .collect()
}

/// A default-sized eye with a central opacity.
pub fn eye_image(seed: u64) -> RgbImage {
    render_scene(&SceneParams::default(), seed).expect("default scene is valid").0
}
