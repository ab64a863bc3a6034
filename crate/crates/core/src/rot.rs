//! 3D rotations parametrized by Euler angles, composed as
//! `R = R_z(γ) · R_y(β) · R_x(α)`.
//!
//! The composition order is fixed project-wide and recorded in checkpoints
//! (tag `"zyx"`); changing it silently would scramble every stored rotation.
//! Row vectors transform as `x_row · R`, which maps a point `x` to `Rᵀ x`
//! in column convention.

/// Row-major 3×3 matrix.
pub type Mat3 = [[f64; 3]; 3];

pub const EULER_ORDER_TAG: &str = "zyx";

pub fn mat3_identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat3_transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat3_apply(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn rot_y(b: f64) -> Mat3 {
    let (s, c) = b.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_z(g: f64) -> Mat3 {
    let (s, c) = g.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Builds `R = R_z(γ)·R_y(β)·R_x(α)` from angles `(α, β, γ)`.
pub fn euler_to_matrix(angles: [f64; 3]) -> Mat3 {
    mat3_mul(&mat3_mul(&rot_z(angles[2]), &rot_y(angles[1])), &rot_x(angles[0]))
}

/// Derivatives of `euler_to_matrix` with respect to each angle.
pub fn euler_to_matrix_derivs(angles: [f64; 3]) -> [Mat3; 3] {
    let (sa, ca) = angles[0].sin_cos();
    let (sb, cb) = angles[1].sin_cos();
    let (sg, cg) = angles[2].sin_cos();
    let rx = rot_x(angles[0]);
    let ry = rot_y(angles[1]);
    let rz = rot_z(angles[2]);
    let drx = [[0.0, 0.0, 0.0], [0.0, -sa, -ca], [0.0, ca, -sa]];
    let dry = [[-sb, 0.0, cb], [0.0, 0.0, 0.0], [-cb, 0.0, -sb]];
    let drz = [[-sg, -cg, 0.0], [cg, -sg, 0.0], [0.0, 0.0, 0.0]];
    [
        mat3_mul(&mat3_mul(&rz, &ry), &drx),
        mat3_mul(&mat3_mul(&rz, &dry), &rx),
        mat3_mul(&mat3_mul(&drz, &ry), &rx),
    ]
}

/// Recovers `(α, β, γ)` with `R = R_z(γ)·R_y(β)·R_x(α)`.
///
/// At gimbal lock (`|cos β|` ≈ 0) the split between α and γ is not unique;
/// α is pinned to 0 there.
pub fn matrix_to_euler(r: &Mat3) -> [f64; 3] {
    let sb = -r[2][0];
    let beta = sb.clamp(-1.0, 1.0).asin();
    if sb.abs() < 1.0 - 1e-12 {
        let alpha = r[2][1].atan2(r[2][2]);
        let gamma = r[1][0].atan2(r[0][0]);
        [alpha, beta, gamma]
    } else {
        let gamma = (-r[0][1]).atan2(r[1][1]);
        [0.0, beta, gamma]
    }
}

/// Geodesic distance between two rotations, in radians.
pub fn geodesic_distance(a: &Mat3, b: &Mat3) -> f64 {
    let rel = mat3_mul(&mat3_transpose(a), b);
    let tr = rel[0][0] + rel[1][1] + rel[2][2];
    (((tr - 1.0) / 2.0).clamp(-1.0, 1.0)).acos()
}

/// Applies `x ↦ Rᵀx` to every row of `points` (i.e., `points · R`) for the
/// rotation built from `angles`. Shared by the autodiff op and the plain
/// inference path so both produce bitwise-identical values.
pub fn rotate_points_rows(points: &crate::mat::Mat, angles: [f64; 3]) -> crate::mat::Mat {
    let r = euler_to_matrix(angles);
    // matmul_nt multiplies by the transpose, so feeding Rᵀ yields points·R.
    let rt = crate::mat::Mat::from_vec(
        3,
        3,
        vec![
            r[0][0], r[1][0], r[2][0], //
            r[0][1], r[1][1], r[2][1], //
            r[0][2], r[1][2], r[2][2],
        ],
    );
    points.matmul_nt(&rt)
}

/// Draws a rotation uniformly from SO(3) (Arvo's method over a quaternion).
pub fn random_rotation(rng: &mut crate::rng::Stream) -> Mat3 {
    // Uniform unit quaternion via Shoemake's subgroup algorithm.
    let u1 = rng.uniform();
    let u2 = rng.uniform();
    let u3 = rng.uniform();
    let two_pi = std::f64::consts::TAU;
    let q = [
        (1.0 - u1).sqrt() * (two_pi * u2).sin(),
        (1.0 - u1).sqrt() * (two_pi * u2).cos(),
        u1.sqrt() * (two_pi * u3).sin(),
        u1.sqrt() * (two_pi * u3).cos(),
    ];
    let (x, y, z, w) = (q[0], q[1], q[2], q[3]);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_angles_identity() {
        assert_eq!(euler_to_matrix([0.0, 0.0, 0.0]), mat3_identity());
    }

    #[test]
    fn z_quarter_turn_transposed_action() {
        // Row convention: x_row · R = Rᵀ x. For γ = π/2 and x = e₁ this is (0, −1, 0).
        let r = euler_to_matrix([0.0, 0.0, FRAC_PI_2]);
        let x = [1.0, 0.0, 0.0];
        let y = mat3_apply(&mat3_transpose(&r), x);
        assert!((y[0] - 0.0).abs() < 1e-15);
        assert!((y[1] + 1.0).abs() < 1e-15);
        assert!((y[2] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonality_for_random_angles() {
        let mut rng = crate::rng::Stream::new(7, "rot-test", 0);
        for _ in 0..200 {
            let angles = [
                rng.uniform_range(-PI, PI),
                rng.uniform_range(-PI, PI),
                rng.uniform_range(-PI, PI),
            ];
            let r = euler_to_matrix(angles);
            let rrt = mat3_mul(&r, &mat3_transpose(&r));
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (rrt[i][j] - want).abs() < 1e-12,
                        "R·Rᵀ departs from identity: {rrt:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn euler_round_trip() {
        // Element-wise comparison: the geodesic metric has an acos floor of
        // ~1e-8 near the identity and would mask real errors.
        let mut rng = crate::rng::Stream::new(13, "rot-test", 1);
        for _ in 0..500 {
            let r = random_rotation(&mut rng);
            let back = euler_to_matrix(matrix_to_euler(&r));
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (r[i][j] - back[i][j]).abs() < 1e-12,
                        "round trip drifted: {r:?} vs {back:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn geodesic_of_known_pair() {
        let a = mat3_identity();
        let b = euler_to_matrix([0.0, 0.0, FRAC_PI_2]);
        assert!((geodesic_distance(&a, &b) - FRAC_PI_2).abs() < 1e-12);
    }
}
