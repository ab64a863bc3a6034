//! Dense row-major f64 matrices and the handful of kernels the network
//! needs: `x·Wᵀ`, bias rows, and the two backward products.
//!
//! Reductions use a fixed four-accumulator order, so results are identical
//! across runs and thread counts. Row-level parallelism only writes disjoint
//! output rows.

use rayon::prelude::*;

/// Minimum number of rows before a kernel bothers spawning rayon tasks.
const PAR_ROW_THRESHOLD: usize = 512;
/// Rows handled per rayon task.
const ROW_BLOCK: usize = 128;
/// Minimum element count before elementwise ops parallelize, and the
/// per-task chunk size.
pub(crate) const PAR_ELEM_THRESHOLD: usize = 1 << 16;
pub(crate) const PAR_ELEM_CHUNK: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape does not match data length");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat {
            rows: rows.len(),
            cols: ncols,
            data,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Mat::from_vec(1, 1, vec![v])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Mat {
        let mut data = vec![0.0; self.data.len()];
        if self.data.len() >= PAR_ELEM_THRESHOLD {
            data.par_chunks_mut(PAR_ELEM_CHUNK)
                .zip(self.data.par_chunks(PAR_ELEM_CHUNK))
                .for_each(|(o, i)| {
                    for (ov, iv) in o.iter_mut().zip(i) {
                        *ov = f(*iv);
                    }
                });
        } else {
            for (ov, iv) in data.iter_mut().zip(&self.data) {
                *ov = f(*iv);
            }
        }
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// `self[B×m] · wᵀ` with `w` stored as `[n×m]`, yielding `[B×n]`.
    ///
    /// Each output element is one dot product over contiguous rows of both
    /// operands; the computation of a row does not depend on any other row,
    /// and the blocked inner loop keeps the exact reduction order of [`dot`].
    pub fn matmul_nt(&self, w: &Mat) -> Mat {
        assert_eq!(self.cols, w.cols, "matmul_nt: inner dimensions differ");
        let n = w.rows;
        let m = self.cols;
        let mut out = Mat::zeros(self.rows, n);
        let work = |(i, orow): (usize, &mut [f64])| {
            let xrow = &self.data[i * m..(i + 1) * m];
            let mut j = 0;
            // Four outputs per pass share each loaded x chunk.
            while j + 4 <= n {
                let w0 = &w.data[j * m..(j + 1) * m];
                let w1 = &w.data[(j + 1) * m..(j + 2) * m];
                let w2 = &w.data[(j + 2) * m..(j + 3) * m];
                let w3 = &w.data[(j + 3) * m..(j + 4) * m];
                let mut a0 = [0.0f64; 4];
                let mut a1 = [0.0f64; 4];
                let mut a2 = [0.0f64; 4];
                let mut a3 = [0.0f64; 4];
                let chunks = m / 4;
                for c in 0..chunks {
                    let k = c * 4;
                    for l in 0..4 {
                        let xv = xrow[k + l];
                        a0[l] += xv * w0[k + l];
                        a1[l] += xv * w1[k + l];
                        a2[l] += xv * w2[k + l];
                        a3[l] += xv * w3[k + l];
                    }
                }
                let mut t = [0.0f64; 4];
                for k in chunks * 4..m {
                    t[0] += xrow[k] * w0[k];
                    t[1] += xrow[k] * w1[k];
                    t[2] += xrow[k] * w2[k];
                    t[3] += xrow[k] * w3[k];
                }
                orow[j] = (a0[0] + a0[1]) + (a0[2] + a0[3]) + t[0];
                orow[j + 1] = (a1[0] + a1[1]) + (a1[2] + a1[3]) + t[1];
                orow[j + 2] = (a2[0] + a2[1]) + (a2[2] + a2[3]) + t[2];
                orow[j + 3] = (a3[0] + a3[1]) + (a3[2] + a3[3]) + t[3];
                j += 4;
            }
            while j < n {
                orow[j] = dot(xrow, &w.data[j * m..(j + 1) * m]);
                j += 1;
            }
        };
        if self.rows >= PAR_ROW_THRESHOLD {
            // Coarse row blocks; per-row tasks are too small to schedule.
            out.data
                .par_chunks_mut(n * ROW_BLOCK)
                .enumerate()
                .for_each(|(blk, chunk)| {
                    for (r, orow) in chunk.chunks_mut(n).enumerate() {
                        work((blk * ROW_BLOCK + r, orow));
                    }
                });
        } else {
            for (i, orow) in out.data.chunks_mut(n).enumerate() {
                work((i, orow));
            }
        }
        out
    }

    /// Adds `b` to every row in place.
    pub fn add_bias_rows(&mut self, b: &[f64]) {
        assert_eq!(self.cols, b.len(), "bias length mismatch");
        for row in self.data.chunks_mut(self.cols) {
            for (v, bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
    }
}

/// Dot product with a fixed 4-lane accumulation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ac = a.chunks_exact(4);
    let mut bc = b.chunks_exact(4);
    for (ca, cb) in (&mut ac).zip(&mut bc) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for (x, y) in ac.remainder().iter().zip(bc.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += c * x` over slices.
#[inline]
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += c * xv;
    }
}

/// Accumulates `gw[n×m] += gᵀ[n×B] · x[B×m]` where `g` is `[B×n]`.
///
/// Row `j` of `gw` is Σᵢ g[i,j]·x[i,:]. Work is split into blocks of output
/// rows; within a block the batch loop is outermost so each x row is read
/// once per block instead of once per output row. The per-row accumulation
/// order (ascending i) is the same either way.
pub fn accum_grad_w(gw: &mut Mat, g: &Mat, x: &Mat) {
    assert_eq!(g.rows, x.rows);
    assert_eq!(gw.rows, g.cols);
    assert_eq!(gw.cols, x.cols);
    let m = gw.cols;
    let batch = g.rows;
    let block = 32usize.min(gw.rows).max(1);
    let work = |(bi, chunk): (usize, &mut [f64])| {
        let j0 = bi * block;
        let jn = chunk.len() / m;
        for i in 0..batch {
            let xrow = x.row(i);
            let grow = &g.data[i * g.cols..(i + 1) * g.cols];
            for dj in 0..jn {
                let c = grow[j0 + dj];
                if c != 0.0 {
                    axpy(&mut chunk[dj * m..(dj + 1) * m], c, xrow);
                }
            }
        }
    };
    if gw.rows * batch >= PAR_ROW_THRESHOLD * 8 {
        gw.data
            .par_chunks_mut(block * m)
            .enumerate()
            .for_each(|(bi, chunk)| work((bi, chunk)));
    } else {
        for (bi, chunk) in gw.data.chunks_mut(block * m).enumerate() {
            work((bi, chunk));
        }
    }
}

/// Accumulates `gx[B×m] += g[B×n] · w[n×m]`.
pub fn accum_grad_x(gx: &mut Mat, g: &Mat, w: &Mat) {
    assert_eq!(gx.rows, g.rows);
    assert_eq!(gx.cols, w.cols);
    assert_eq!(g.cols, w.rows);
    let m = w.cols;
    let n = w.rows;
    let work = |(i, xrow): (usize, &mut [f64])| {
        for j in 0..n {
            let c = g.get(i, j);
            if c != 0.0 {
                axpy(xrow, c, &w.data[j * m..(j + 1) * m]);
            }
        }
    };
    if gx.rows >= PAR_ROW_THRESHOLD {
        gx.data
            .par_chunks_mut(m * ROW_BLOCK)
            .enumerate()
            .for_each(|(blk, chunk)| {
                for (r, xrow) in chunk.chunks_mut(m).enumerate() {
                    work((blk * ROW_BLOCK + r, xrow));
                }
            });
    } else {
        for (i, xrow) in gx.data.chunks_mut(m).enumerate() {
            work((i, xrow));
        }
    }
}
