//! Per-channel histogram matching baseline: map each channel of the content
//! image onto the reference quantiles by sorted position.

use crate::error::Result;
use crate::palette::ImageBuffer;

/// Replace the i-th order statistic of each content channel with the
/// reference value at the matching quantile. Matching an image against
/// itself is the identity.
pub fn histogram_match(content: &ImageBuffer, reference: &ImageBuffer) -> Result<ImageBuffer> {
    let nc = content.pixel_count();
    let nr = reference.pixel_count();
    let mut out = content.data().to_vec();

    for ch in 0..3 {
        let mut order: Vec<usize> = (0..nc).collect();
        order.sort_by(|&i, &j| {
            content.data()[i * 3 + ch]
                .partial_cmp(&content.data()[j * 3 + ch])
                .unwrap()
                .then(i.cmp(&j))
        });
        let mut ref_sorted: Vec<f64> = (0..nr).map(|i| reference.data()[i * 3 + ch]).collect();
        ref_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

        for (rank, &i) in order.iter().enumerate() {
            // midpoint rank; for equal pixel counts this maps rank -> rank
            let q = ((rank as f64 + 0.5) * nr as f64 / nc as f64) as usize;
            out[i * 3 + ch] = ref_sorted[q.min(nr - 1)];
        }
    }
    ImageBuffer::new(content.width(), content.height(), out)
}
