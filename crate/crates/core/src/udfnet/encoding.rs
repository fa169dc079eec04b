use ndarray::Array2;

use crate::geometry::Point3;

/// Width of the encoded input for `pe_count` frequency bands.
pub fn encoded_width(pe_count: usize) -> usize {
    3 + 6 * pe_count
}

/// `[x, sin(2^0 x), cos(2^0 x), ..., sin(2^{N-1} x), cos(2^{N-1} x)]`, each
/// term applied per component.
pub fn positional_encode(x: &Point3, pe_count: usize) -> Vec<f64> {
    let mut out = vec![0.0; encoded_width(pe_count)];
    encode_into(x, pe_count, &mut out);
    out
}

fn encode_into(x: &Point3, pe_count: usize, out: &mut [f64]) {
    out[..3].copy_from_slice(&[x.x, x.y, x.z]);
    let mut freq = 1.0;
    for i in 0..pe_count {
        let base = 3 + 6 * i;
        for c in 0..3 {
            let arg = freq * x[c];
            out[base + c] = arg.sin();
            out[base + 3 + c] = arg.cos();
        }
        freq *= 2.0;
    }
}

/// Encodes a batch of points into a `points.len() x encoded_width` matrix.
pub fn encode_batch(points: &[Point3], pe_count: usize) -> Array2<f64> {
    let width = encoded_width(pe_count);
    let mut out = Array2::zeros((points.len(), width));
    for (row, p) in out.rows_mut().into_iter().zip(points) {
        let mut row = row;
        encode_into(p, pe_count, row.as_slice_mut().expect("standard layout"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_with_one_band() {
        let enc = positional_encode(&Point3::origin(), 1);
        assert_eq!(enc, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_bands_is_identity() {
        let p = Point3::new(0.25, -1.5, 3.0);
        assert_eq!(positional_encode(&p, 0), vec![0.25, -1.5, 3.0]);
    }

    #[test]
    fn four_bands_width() {
        assert_eq!(positional_encode(&Point3::new(1.0, 2.0, 3.0), 4).len(), 27);
    }

    #[test]
    fn dyadic_frequencies() {
        let p = Point3::new(0.3, -0.2, 0.1);
        let enc = positional_encode(&p, 3);
        for i in 0..3 {
            let f = f64::powi(2.0, i as i32);
            for c in 0..3 {
                assert_eq!(enc[3 + 6 * i + c], (f * p[c]).sin());
                assert_eq!(enc[3 + 6 * i + 3 + c], (f * p[c]).cos());
            }
        }
    }

    #[test]
    fn batch_rows_match_single() {
        let pts = [Point3::new(0.1, 0.2, 0.3), Point3::new(-0.4, 0.5, -0.6)];
        let batch = encode_batch(&pts, 4);
        for (row, p) in batch.rows().into_iter().zip(&pts) {
            assert_eq!(row.to_vec(), positional_encode(p, 4));
        }
    }
}
