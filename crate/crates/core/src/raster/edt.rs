//! Exact Euclidean distance transform via the separable lower-envelope of
//! parabolas: a column pass followed by a row pass, each linear in the
//! number of pixels.

use super::{BinaryMask, DistanceField};

/// Exact distance (pixel centre to pixel centre) from every pixel to the
/// nearest foreground pixel. An all-background mask yields `+inf` everywhere.
pub fn euclidean_distance_transform(mask: &BinaryMask) -> DistanceField {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut sq = vec![f64::INFINITY; w * h];

    let mut scratch = Envelope::with_capacity(w.max(h));
    let mut col_in = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col_in[y] = if bits[y * w + x] { 0.0 } else { f64::INFINITY };
        }
        scratch.transform(&col_in, &mut col_out);
        for y in 0..h {
            sq[y * w + x] = col_out[y];
        }
    }

    let mut row_out = vec![0.0; w];
    for y in 0..h {
        let row = &mut sq[y * w..(y + 1) * w];
        scratch.transform(row, &mut row_out);
        row.copy_from_slice(&row_out);
    }

    for v in &mut sq {
        *v = v.sqrt();
    }
    DistanceField::from_raw(w, h, sq)
}

/// Reusable buffers for the 1-D squared-distance transform.
struct Envelope {
    // parabola apex positions
    v: Vec<usize>,
    // boundaries between consecutive parabolas
    z: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            v: Vec::with_capacity(n),
            z: Vec::with_capacity(n + 1),
        }
    }

    /// `out[q] = min_p (q - p)^2 + f[p]` over finite `f[p]`; `+inf` when no
    /// sample is finite.
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.v.clear();
        self.z.clear();
        for (q, &fq) in f.iter().enumerate() {
            if !fq.is_finite() {
                continue;
            }
            if self.v.is_empty() {
                self.v.push(q);
                self.z.push(f64::NEG_INFINITY);
                continue;
            }
            let qf = q as f64;
            // z[0] is -inf, so the envelope never empties
            let s = loop {
                let p = *self.v.last().unwrap();
                let pf = p as f64;
                let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
                if s <= *self.z.last().unwrap() {
                    self.v.pop();
                    self.z.pop();
                } else {
                    break s;
                }
            };
            self.v.push(q);
            self.z.push(s);
        }

        if self.v.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            let qf = q as f64;
            while k + 1 < self.v.len() && self.z[k + 1] < qf {
                k += 1;
            }
            let p = self.v[k];
            let dq = qf - p as f64;
            *o = dq * dq + f[p];
        }
    }
}
