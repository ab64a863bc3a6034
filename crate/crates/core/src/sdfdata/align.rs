//! Frame centering and principal-axis alignment.
//!
//! Centering translates each frame by a whole-voxel offset so the foreground
//! centroid lands on the grid center. Alignment additionally rotates the
//! mask so the principal axes of the foreground (eigenvectors of the second
//! central moment matrix in physical coordinates, largest spread first) map
//! onto the grid x/y/z axes, resampling nearest-neighbor. Eigenvector signs
//! are fixed by requiring non-negative third central moment along each axis,
//! with the largest-magnitude component made positive when the moment is
//! ~zero, so repeated runs take identical branches.
//!
//! A frame holding exactly two bodies (the mitosis case) is split by
//! 26-connectivity labeling and each component is centered/aligned in its
//! own half of the domain along x.

use super::{ContentError, Volume, VoxelSequence};
use crate::rot::{mat3_apply, Mat3};

/// Centers every frame; when `align` is set, also rotates each frame onto
/// its principal axes (per component when a frame holds two bodies).
pub fn center_and_align(seq: &VoxelSequence, align: bool) -> Result<VoxelSequence, ContentError> {
    let mut volumes = Vec::with_capacity(seq.volumes.len());
    for (frame_idx, vol) in seq.volumes.iter().enumerate() {
        if !align {
            volumes.push(center_whole(vol, seq.spacing));
            continue;
        }
        let comps = connected_components(vol);
        match comps.len() {
            1 => volumes.push(align_into(
                vol,
                &comps[0],
                seq.spacing,
                full_domain_center(vol.dims),
                None,
            )),
            2 => {
                // The component with the smaller x centroid goes to the left
                // half-domain.
                let c0 = centroid(&comps[0]);
                let c1 = centroid(&comps[1]);
                let (left, right) = if c0[0] <= c1[0] {
                    (&comps[0], &comps[1])
                } else {
                    (&comps[1], &comps[0])
                };
                let (nx, ny, nz) = vol.dims;
                let half = nx / 2;
                let left_center = [
                    (half as f64 - 1.0) / 2.0,
                    (ny as f64 - 1.0) / 2.0,
                    (nz as f64 - 1.0) / 2.0,
                ];
                let right_center = [
                    half as f64 + (nx as f64 - half as f64 - 1.0) / 2.0,
                    (ny as f64 - 1.0) / 2.0,
                    (nz as f64 - 1.0) / 2.0,
                ];
                let mut out = align_into(vol, left, seq.spacing, left_center, Some((0, half)));
                let rhs = align_into(vol, right, seq.spacing, right_center, Some((half, nx)));
                for (o, r) in out.data.iter_mut().zip(&rhs.data) {
                    *o |= r;
                }
                volumes.push(out);
            }
            n => {
                return Err(ContentError::TooManyComponents {
                    frame: frame_idx,
                    count: n,
                })
            }
        }
    }
    Ok(VoxelSequence {
        volumes,
        spacing: seq.spacing,
        dims: seq.dims,
        name: seq.name.clone(),
    })
}

fn full_domain_center(dims: (usize, usize, usize)) -> [f64; 3] {
    [
        (dims.0 as f64 - 1.0) / 2.0,
        (dims.1 as f64 - 1.0) / 2.0,
        (dims.2 as f64 - 1.0) / 2.0,
    ]
}

/// Integer shift that moves `from` toward `to`, stable at exact half-voxel
/// offsets (|residual| = 0.5 stays put instead of oscillating between runs).
fn stable_shift(from: f64, to: f64) -> isize {
    let d = to - from;
    (d.signum() * (d.abs() + 0.5 - 1e-9).floor()) as isize
}

/// Whole-voxel translation of the full frame onto the grid center.
fn center_whole(vol: &Volume, _spacing: (f64, f64, f64)) -> Volume {
    let coords: Vec<[usize; 3]> = vol
        .iter_coords()
        .filter(|&(x, y, z)| vol.get(x, y, z) != 0)
        .map(|(x, y, z)| [x, y, z])
        .collect();
    let c = centroid(&coords);
    let target = full_domain_center(vol.dims);
    let shift = [
        stable_shift(c[0], target[0]),
        stable_shift(c[1], target[1]),
        stable_shift(c[2], target[2]),
    ];
    translate(vol, &coords, shift, None)
}

fn translate(
    vol: &Volume,
    coords: &[[usize; 3]],
    shift: [isize; 3],
    x_window: Option<(usize, usize)>,
) -> Volume {
    let (nx, ny, nz) = vol.dims;
    let (x_lo, x_hi) = x_window.unwrap_or((0, nx));
    let mut out = Volume::zeros(vol.dims);
    for c in coords {
        let x = c[0] as isize + shift[0];
        let y = c[1] as isize + shift[1];
        let z = c[2] as isize + shift[2];
        if x >= x_lo as isize && x < x_hi as isize && y >= 0 && y < ny as isize && z >= 0 && z < nz as isize
        {
            out.set(x as usize, y as usize, z as usize, 1);
        }
    }
    out
}

fn centroid(coords: &[[usize; 3]]) -> [f64; 3] {
    let n = coords.len() as f64;
    let mut c = [0.0; 3];
    for p in coords {
        c[0] += p[0] as f64;
        c[1] += p[1] as f64;
        c[2] += p[2] as f64;
    }
    [c[0] / n, c[1] / n, c[2] / n]
}

/// Centers (and axis-aligns) one component into `target_center`, rendering
/// only inside `x_window` when given.
///
/// Rotation and translation are applied separately: the mask is first
/// resampled about its own centroid (so a later run reproduces the same
/// voxel set), then translated by a whole-voxel stable shift. Rotations
/// within ~1e-3 of the identity are snapped to the identity — re-aligning an
/// already aligned frame must not dither boundary voxels.
fn align_into(
    vol: &Volume,
    coords: &[[usize; 3]],
    spacing: (f64, f64, f64),
    target_center: [f64; 3],
    x_window: Option<(usize, usize)>,
) -> Volume {
    let c = centroid(coords);
    let axes = principal_axes(coords, c, spacing);
    let (nx, ny, nz) = vol.dims;
    let identity = axes
        .iter()
        .enumerate()
        .all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, v)| (v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-3)
        });

    // Membership is restricted to this component (matters for two-body frames).
    let mut comp_mask = Volume::zeros(vol.dims);
    for p in coords {
        comp_mask.set(p[0], p[1], p[2], 1);
    }

    let rotated_coords: Vec<[usize; 3]> = if identity {
        coords.to_vec()
    } else {
        let mut list = Vec::new();
        for zo in 0..nz {
            for yo in 0..ny {
                for xo in 0..nx {
                    let d_phys = [
                        (xo as f64 - c[0]) * spacing.0,
                        (yo as f64 - c[1]) * spacing.1,
                        (zo as f64 - c[2]) * spacing.2,
                    ];
                    let src_phys = mat3_apply(&axes, d_phys);
                    let xs = (c[0] + src_phys[0] / spacing.0).round() as isize;
                    let ys = (c[1] + src_phys[1] / spacing.1).round() as isize;
                    let zs = (c[2] + src_phys[2] / spacing.2).round() as isize;
                    if xs >= 0
                        && ys >= 0
                        && zs >= 0
                        && (xs as usize) < nx
                        && (ys as usize) < ny
                        && (zs as usize) < nz
                        && comp_mask.get(xs as usize, ys as usize, zs as usize) != 0
                    {
                        list.push([xo, yo, zo]);
                    }
                }
            }
        }
        list
    };

    let rc = centroid(&rotated_coords);
    let shift = [
        stable_shift(rc[0], target_center[0]),
        stable_shift(rc[1], target_center[1]),
        stable_shift(rc[2], target_center[2]),
    ];
    translate(vol, &rotated_coords, shift, x_window)
}

/// Principal axes as a matrix with the eigenvectors of the second-moment
/// matrix in its columns, ordered by descending spread, signs fixed, and the
/// third axis forced to a right-handed frame.
///
/// Near-degenerate spectra (any adjacent eigengap under 2% of the largest
/// eigenvalue) return the identity: a ball has no meaningful principal
/// frame and rotating it to an arbitrary one would never be reproducible
/// after resampling.
fn principal_axes(coords: &[[usize; 3]], c: [f64; 3], spacing: (f64, f64, f64)) -> Mat3 {
    let n = coords.len() as f64;
    let mut m = [[0.0f64; 3]; 3];
    for p in coords {
        let d = [
            (p[0] as f64 - c[0]) * spacing.0,
            (p[1] as f64 - c[1]) * spacing.1,
            (p[2] as f64 - c[2]) * spacing.2,
        ];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += d[i] * d[j];
            }
        }
    }
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    let (vals, vecs) = crate::eval::jacobi_eigen_3x3(&m);
    // Sort descending by eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let top = vals[order[0]].max(1e-300);
    if (vals[order[0]] - vals[order[1]]) < 0.02 * top
        || (vals[order[1]] - vals[order[2]]) < 0.02 * top
    {
        return crate::rot::mat3_identity();
    }
    let mut e: [[f64; 3]; 3] = [[0.0; 3]; 3];
    for (k, &oi) in order.iter().enumerate() {
        for i in 0..3 {
            e[i][k] = vecs[i][oi];
        }
    }
    // Sign fix: non-negative skewness along each of the first two axes.
    for k in 0..2 {
        let mut skew = 0.0;
        for p in coords {
            let d = [
                (p[0] as f64 - c[0]) * spacing.0,
                (p[1] as f64 - c[1]) * spacing.1,
                (p[2] as f64 - c[2]) * spacing.2,
            ];
            let proj = d[0] * e[0][k] + d[1] * e[1][k] + d[2] * e[2][k];
            skew += proj * proj * proj;
        }
        let flip = if skew.abs() > 1e-9 * n {
            skew < 0.0
        } else {
            // Symmetric along this axis: make the largest-magnitude
            // component positive instead.
            let mut big = 0usize;
            for i in 1..3 {
                if e[i][k].abs() > e[big][k].abs() {
                    big = i;
                }
            }
            e[big][k] < 0.0
        };
        if flip {
            for i in 0..3 {
                e[i][k] = -e[i][k];
            }
        }
    }
    // Right-handed third axis.
    e[0][2] = e[1][0] * e[2][1] - e[2][0] * e[1][1];
    e[1][2] = e[2][0] * e[0][1] - e[0][0] * e[2][1];
    e[2][2] = e[0][0] * e[1][1] - e[1][0] * e[0][1];
    e
}

/// 26-connectivity component labeling; returns per-component voxel lists,
/// ordered by first-encountered voxel (scan order).
pub fn connected_components(vol: &Volume) -> Vec<Vec<[usize; 3]>> {
    let (nx, ny, nz) = vol.dims;
    let mut seen = vec![false; vol.data.len()];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = vol.idx(x, y, z);
                if vol.data[i] == 0 || seen[i] {
                    continue;
                }
                let mut comp = Vec::new();
                seen[i] = true;
                stack.push([x, y, z]);
                while let Some(p) = stack.pop() {
                    comp.push(p);
                    for dz in -1i32..=1 {
                        for dy in -1i32..=1 {
                            for dx in -1i32..=1 {
                                if dx == 0 && dy == 0 && dz == 0 {
                                    continue;
                                }
                                let qx = p[0] as i32 + dx;
                                let qy = p[1] as i32 + dy;
                                let qz = p[2] as i32 + dz;
                                if qx < 0
                                    || qy < 0
                                    || qz < 0
                                    || qx >= nx as i32
                                    || qy >= ny as i32
                                    || qz >= nz as i32
                                {
                                    continue;
                                }
                                let qi = vol.idx(qx as usize, qy as usize, qz as usize);
                                if vol.data[qi] != 0 && !seen[qi] {
                                    seen[qi] = true;
                                    stack.push([qx as usize, qy as usize, qz as usize]);
                                }
                            }
                        }
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}
