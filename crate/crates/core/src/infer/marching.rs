//! Marching cubes over [`SdfGrid`] samples.
//!
//! The classic 256-case tables with linear interpolation along crossed
//! edges. Vertices are shared through a global edge map, so closed surfaces
//! strictly inside the grid come out watertight and 2-manifold. Triangles
//! are wound so normals point toward positive values (outward for SDFs).

use super::tables::{CORNERS_OF_EDGE, CORNER_OFFSETS, EDGE_TABLE, TRI_TABLE};
use super::MeshSurface;
use crate::sdfdata::SdfGrid;
use std::collections::HashMap;

/// Extracts the `iso` level set. Returns an empty mesh when the level does
/// not cross the grid's value range; callers may warn on that.
pub fn marching_cubes(grid: &SdfGrid, iso: f64) -> MeshSurface {
    let (nx, ny, nz) = grid.grid;
    let mut mesh = MeshSurface {
        vertices: Vec::new(),
        triangles: Vec::new(),
        unit_um: false,
    };
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    // Global edge key: (x, y, z, axis) of the edge's lower corner.
    let mut edge_vertices: HashMap<(usize, usize, usize, u8), usize> = HashMap::new();
    let mut corner_vals = [0.0f64; 8];
    let mut corner_pos = [[0.0f64; 3]; 8];

    for z in 0..nz - 1 {
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let mut case = 0usize;
                for (i, &(dx, dy, dz)) in CORNER_OFFSETS.iter().enumerate() {
                    let v = grid.value(x + dx, y + dy, z + dz);
                    corner_vals[i] = v;
                    corner_pos[i] = grid.position(x + dx, y + dy, z + dz);
                    if v < iso {
                        case |= 1 << i;
                    }
                }
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                let mut cell_vertex = [usize::MAX; 12];
                for edge in 0..12 {
                    if EDGE_TABLE[case] & (1 << edge) == 0 {
                        continue;
                    }
                    let (ca, cb) = CORNERS_OF_EDGE[edge];
                    let (oa, ob) = (CORNER_OFFSETS[ca], CORNER_OFFSETS[cb]);
                    let lower = (x + oa.0.min(ob.0), y + oa.1.min(ob.1), z + oa.2.min(ob.2));
                    let axis = if oa.0 != ob.0 {
                        0u8
                    } else if oa.1 != ob.1 {
                        1
                    } else {
                        2
                    };
                    let key = (lower.0, lower.1, lower.2, axis);
                    let idx = *edge_vertices.entry(key).or_insert_with(|| {
                        let (va, vb) = (corner_vals[ca], corner_vals[cb]);
                        let denom = vb - va;
                        let t = if denom.abs() < 1e-300 {
                            0.5
                        } else {
                            ((iso - va) / denom).clamp(0.0, 1.0)
                        };
                        let (pa, pb) = (corner_pos[ca], corner_pos[cb]);
                        mesh.vertices.push([
                            pa[0] + t * (pb[0] - pa[0]),
                            pa[1] + t * (pb[1] - pa[1]),
                            pa[2] + t * (pb[2] - pa[2]),
                        ]);
                        mesh.vertices.len() - 1
                    });
                    cell_vertex[edge] = idx;
                }
                let tri_row = &TRI_TABLE[case];
                let mut k = 0;
                while tri_row[k] >= 0 {
                    let a = cell_vertex[tri_row[k] as usize];
                    let b = cell_vertex[tri_row[k + 1] as usize];
                    let c = cell_vertex[tri_row[k + 2] as usize];
                    k += 3;
                    if a == b || b == c || a == c {
                        continue;
                    }
                    // The tables orient toward the below-iso side; flip so
                    // normals point toward positive values.
                    mesh.triangles.push([a, c, b]);
                }
            }
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{mesh_area, mesh_volume, open_edge_count};

    fn analytic_grid(n: usize, f: impl Fn(f64, f64, f64) -> f64) -> SdfGrid {
        let step = 2.0 / n as f64;
        let origin = -1.0 + step / 2.0;
        let mut values = Vec::with_capacity(n * n * n);
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let p = [
                        origin + x as f64 * step,
                        origin + y as f64 * step,
                        origin + z as f64 * step,
                    ];
                    values.push(f(p[0], p[1], p[2]));
                }
            }
        }
        SdfGrid {
            values,
            grid: (n, n, n),
            time_coord: 0.0,
            scale: 1.0,
            origin: (origin, origin, origin),
            step: (step, step, step),
        }
    }

    #[test]
    fn sphere_area_volume_euler() {
        let r = 0.5;
        let grid = analytic_grid(64, |x, y, z| (x * x + y * y + z * z).sqrt() - r);
        let mesh = marching_cubes(&grid, 0.0);
        let area = mesh_area(&mesh);
        let volume = mesh_volume(&mesh);
        let area_ref = 4.0 * std::f64::consts::PI * r * r;
        let vol_ref = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
        assert!((area / area_ref - 1.0).abs() < 0.02, "area {area} vs {area_ref}");
        assert!((volume / vol_ref - 1.0).abs() < 0.02, "vol {volume} vs {vol_ref}");
        assert_eq!(open_edge_count(&mesh), 0, "sphere mesh must be watertight");
        // Euler characteristic V − E + F = 2 for a sphere.
        let v = mesh.vertices.len() as isize;
        let f = mesh.triangles.len() as isize;
        let e = {
            let mut set = std::collections::HashSet::new();
            for t in &mesh.triangles {
                for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                    set.insert((a.min(b), a.max(b)));
                }
            }
            set.len() as isize
        };
        assert_eq!(v - e + f, 2, "V={v} E={e} F={f}");
    }

    #[test]
    fn normals_point_toward_positive_values() {
        // Signed volume of an outward-oriented closed mesh is positive.
        let grid = analytic_grid(32, |x, y, z| (x * x + y * y + z * z).sqrt() - 0.6);
        let mesh = marching_cubes(&grid, 0.0);
        let mut signed = 0.0;
        for t in &mesh.triangles {
            let a = mesh.vertices[t[0]];
            let b = mesh.vertices[t[1]];
            let c = mesh.vertices[t[2]];
            signed += (a[0] * (b[1] * c[2] - b[2] * c[1])
                - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]))
                / 6.0;
        }
        assert!(signed > 0.0, "signed volume {signed} must be positive");
    }

    #[test]
    fn all_positive_grid_gives_empty_mesh() {
        let grid = analytic_grid(16, |_, _, _| 1.0);
        let mesh = marching_cubes(&grid, 0.0);
        assert!(mesh.vertices.is_empty() && mesh.triangles.is_empty());
    }

    #[test]
    fn half_space_area_matches_cross_section() {
        // Plane x = 0.1; the zero set inside [−1,1]³ is a 2×2 quad.
        let grid = analytic_grid(48, |x, _, _| x - 0.1);
        let mesh = marching_cubes(&grid, 0.0);
        let area = mesh_area(&mesh);
        // The sampled domain spans voxel centers, so the cross-section is
        // (2 − step)² exactly.
        let step = 2.0 / 48.0;
        let expect = (2.0 - step) * (2.0 - step);
        assert!(
            (area / expect - 1.0).abs() < 0.01,
            "area {area} vs {expect}"
        );
        for v in &mesh.vertices {
            assert!((v[0] - 0.1).abs() < 1e-9, "plane vertices sit at x=0.1");
        }
    }

    #[test]
    fn growing_sphere_meshes_at_two_levels() {
        let grid = analytic_grid(32, |x, y, z| (x * x + y * y + z * z).sqrt() - 0.4);
        // Positive iso inflates the sphere: r = 0.4 + 0.2.
        let mesh = marching_cubes(&grid, 0.2);
        let vol = mesh_volume(&mesh);
        let expect = 4.0 / 3.0 * std::f64::consts::PI * 0.6f64.powi(3);
        assert!((vol / expect - 1.0).abs() < 0.03, "vol {vol} vs {expect}");
    }
}
