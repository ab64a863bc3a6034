//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `--nocapture` to see them).
//!
//! The training-based criteria run at desk scale on analytic fixtures and
//! assert the documented thresholds directly; nothing here is tuned at
//! runtime.

use nsdf_core::autodiff::check_gradients;
use nsdf_core::eval::{
    dice, kolmogorov_survival, ks_two_sample, mesh_area, mesh_volume, shape_metrics, VolumeMode,
};
use nsdf_core::experiments::{
    make_fixture, matching_grid_spec, reconstruction_dsc, run_ablation_equivariance,
    run_interpolation_study, run_spectral_study, run_activation_comparison, AblationConfig,
    ActivationConfig, FixtureKind, FixtureSpec, InterpolationConfig, SpectralConfig,
};
use nsdf_core::infer::{evaluate_grid, marching_cubes, voxelize, GridSpec};
use nsdf_core::mat::Mat;
use nsdf_core::model::{
    build_tape_forward, init_model, ArchitectureSpec, Activation, ModelState,
};
use nsdf_core::rng::Stream;
use nsdf_core::rot::{
    euler_to_matrix, geodesic_distance, mat3_apply, mat3_mul, matrix_to_euler, random_rotation,
};
use nsdf_core::sdfdata::{signed_distance_transform, SdfGrid, Volume};
use nsdf_core::train::{fit_latent, loss_code, loss_reconstruction, train, FitConfig, TrainConfig};
use std::time::Instant;

fn pass(n: usize, desc: &str, detail: &str) {
    println!("[PASS] criterion {n}: {desc} — {detail}");
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient oracle on the full rotation-aware model
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_gradient_oracle() {
    let t0 = Instant::now();
    let arch = ArchitectureSpec {
        hidden_layers: 9,
        hidden_width: 32,
        latent_dim: 8,
        omega0: 30.0,
        activation: Activation::Sine,
        latent_inject_layers: vec![1, 5, 8],
        coord_inject: true,
        equivariant: true,
        clamp_delta: None,
    };
    let mut rng = Stream::new(1001, "acc1-init", 0);
    let mut state = init_model(&arch, 1, 1.0, &mut rng).unwrap();
    // Redraw hidden weights at ~unit per-layer gain; the production init
    // shrinks deep-layer gradients to the finite-difference noise floor,
    // which would measure the probe instead of the chain rule.
    for (idx, (c_in, _)) in arch.layer_dims().into_iter().enumerate() {
        if idx == 0 {
            continue;
        }
        let bound = (6.0 / (arch.omega0 * c_in as f64)).sqrt();
        for v in state.layers[idx].w.data_mut() {
            *v = rng.uniform_range(-bound, bound);
        }
    }
    let n_pts = 48;
    let mut pts = Vec::new();
    let mut times = Vec::new();
    for _ in 0..n_pts {
        pts.push([
            rng.uniform_range(-1.0, 1.0),
            rng.uniform_range(-1.0, 1.0),
            rng.uniform_range(-1.0, 1.0),
        ]);
        times.push(rng.uniform_range(-1.0, 1.0));
    }
    // Targets sit a safe distance from predictions so the L1 kink is never
    // crossed by the ±1e-6 probes.
    let z0 = state.latents[0].clone();
    let a0 = state.angles[0];
    let base = state.forward(&pts, &times, &z0, Some(a0)).unwrap();
    let targets: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(i, v)| v + if i % 2 == 0 { 0.05 } else { -0.08 })
        .collect();

    let report = check_gradients(
        |tape| {
            let weight_ids: Vec<_> = state
                .layers
                .iter()
                .map(|l| {
                    let w = tape.leaf(l.w.clone());
                    let b = tape.leaf(Mat::from_vec(1, l.b.len(), l.b.clone()));
                    (w, b)
                })
                .collect();
            let pmat = Mat::from_rows(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>());
            let tmat = Mat::from_vec(n_pts, 1, times.clone());
            let tgt = Mat::from_vec(n_pts, 1, targets.clone());
            let pid = tape.constant(pmat);
            let tid = tape.constant(tmat);
            let tgt_id = tape.constant(tgt);
            let zid = tape.leaf(Mat::from_vec(1, 8, z0.clone()));
            let aid = tape.leaf(Mat::from_vec(1, 3, a0.to_vec()));
            let pred =
                build_tape_forward(tape, &arch, &weight_ids, pid, tid, Some(zid), Some(aid))
                    .unwrap();
            let diff = tape.sub(pred, tgt_id).unwrap();
            let rec = tape.mean_abs(diff).unwrap();
            let zsq = tape.sum_sq(zid);
            let code = tape.scale(zsq, 1.0 / state.sigma2);
            let total = tape.sum_scalars(&[rec, code]).unwrap();
            let mut params = vec![("z".to_string(), zid), ("angles".to_string(), aid)];
            for (i, &(w, b)) in weight_ids.iter().enumerate() {
                params.push((format!("w{i}"), w));
                params.push((format!("b{i}"), b));
            }
            (total, params)
        },
        1e-6,
        1e-5,
    );
    assert!(
        report.pass,
        "criterion 1 FAILED: max rel err {} at {}",
        report.max_rel_err, report.worst_param
    );
    pass(
        1,
        "analytic gradients match central finite differences at 1e-5",
        &format!(
            "max rel err {:.3e} at {}, {:.1}s",
            report.max_rel_err,
            report.worst_param,
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: equivariance identity of the sample objective
// ---------------------------------------------------------------------------

/// Eq-10-style sample objective: mean L1 of f(R_φᵀ x) against targets plus
/// the latent regularizer.
fn sample_objective(
    state: &ModelState,
    pts: &[[f64; 3]],
    times: &[f64],
    targets: &[f64],
    z: &[f64],
    angles: [f64; 3],
) -> f64 {
    let pred = state.forward(pts, times, z, Some(angles)).unwrap();
    loss_reconstruction(&pred, targets).unwrap() + loss_code(z, state.sigma2)
}

#[test]
fn criterion_02_equivariance_identity() {
    let t0 = Instant::now();
    let arch = ArchitectureSpec {
        hidden_layers: 4,
        hidden_width: 32,
        latent_dim: 8,
        latent_inject_layers: vec![1, 3],
        equivariant: true,
        ..ArchitectureSpec::default()
    };
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let mut rng = Stream::new(2000 + case, "acc2", case);
        let state = init_model(&arch, 1, 1e-2, &mut rng).unwrap();
        let z: Vec<f64> = (0..8).map(|_| rng.normal_with(0.0, 0.01)).collect();
        let phi = [
            rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI),
            rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI),
            rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI),
        ];
        let r_tilde = random_rotation(&mut rng);
        let n = 512;
        let mut pts = Vec::with_capacity(n);
        let mut times = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            pts.push([
                rng.uniform_range(-1.0, 1.0),
                rng.uniform_range(-1.0, 1.0),
                rng.uniform_range(-1.0, 1.0),
            ]);
            times.push(rng.uniform_range(-1.0, 1.0));
            targets.push(rng.uniform_range(-0.5, 0.5));
        }
        let obj_base = sample_objective(&state, &pts, &times, &targets, &z, phi);
        // Rotate the sample set and compose the rotation into the angles.
        let rot_pts: Vec<[f64; 3]> = pts.iter().map(|p| mat3_apply(&r_tilde, *p)).collect();
        let composed = matrix_to_euler(&mat3_mul(&r_tilde, &euler_to_matrix(phi)));
        let obj_rot = sample_objective(&state, &rot_pts, &times, &targets, &z, composed);
        let diff = (obj_base - obj_rot).abs();
        worst = worst.max(diff);
        assert!(
            diff <= 1e-9,
            "criterion 2 FAILED at case {case}: |{obj_base} - {obj_rot}| = {diff}"
        );
    }
    pass(
        2,
        "objective at (R~ R_phi, z) on rotated samples equals original within 1e-9",
        &format!("100 cases, worst |Δ| {:.3e}, {:.1}s", worst, t0.elapsed().as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: exact EDT against the all-pairs oracle
// ---------------------------------------------------------------------------

/// All-pairs oracle using the accumulation order of the separable passes.
fn brute_force_signed(vol: &Volume, spacing: (f64, f64, f64)) -> Vec<f64> {
    let (nx, ny, nz) = vol.dims;
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if vol.get(x, y, z) != 0 {
                    fg.push((x, y, z));
                } else {
                    bg.push((x, y, z));
                }
            }
        }
    }
    let sq = |p: (usize, usize, usize), s: &(usize, usize, usize)| {
        let dx = (p.0 as f64 - s.0 as f64) * spacing.0;
        let dy = (p.1 as f64 - s.1 as f64) * spacing.1;
        let dz = (p.2 as f64 - s.2 as f64) * spacing.2;
        dz * dz + (dy * dy + dx * dx)
    };
    let mut out = vec![0.0; nx * ny * nz];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = (x, y, z);
                let dfg = fg.iter().map(|s| sq(p, s)).fold(f64::INFINITY, f64::min);
                let dbg = bg.iter().map(|s| sq(p, s)).fold(f64::INFINITY, f64::min);
                out[z * nx * ny + y * nx + x] = dfg.sqrt() - dbg.sqrt();
            }
        }
    }
    out
}

#[test]
fn criterion_07_edt_exactness() {
    let t0 = Instant::now();
    let mut rng = Stream::new(7007, "acc7", 0);
    let spacings = [(1.0, 1.0, 1.0), (1.0, 1.0, 2.0), (2.0, 1.0, 1.0), (0.125, 0.125, 0.125)];
    let mut tested = 0usize;
    while tested < 200 {
        let nx = 2 + rng.index(15);
        let ny = 2 + rng.index(15);
        let nz = 2 + rng.index(15);
        let mut vol = Volume::zeros((nx, ny, nz));
        let fill = 0.02 + 0.96 * rng.uniform();
        for v in vol.data.iter_mut() {
            *v = (rng.uniform() < fill) as u8;
        }
        let fgc = vol.foreground_count();
        if fgc == 0 || fgc == vol.data.len() {
            continue;
        }
        let spacing = spacings[tested % spacings.len()];
        let fast = signed_distance_transform(&vol, spacing).unwrap();
        let brute = brute_force_signed(&vol, spacing);
        for (i, (a, b)) in fast.iter().zip(&brute).enumerate() {
            assert!(
                a == b,
                "criterion 7 FAILED: volume {tested} ({nx}x{ny}x{nz}, spacing {spacing:?}) differs at {i}: {a:?} vs {b:?}"
            );
        }
        tested += 1;
    }
    pass(
        7,
        "signed EDT equals the brute-force oracle bit for bit",
        &format!("200 random volumes <=16^3, {:.1}s", t0.elapsed().as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: geometry oracles
// ---------------------------------------------------------------------------

fn analytic_sphere_grid(n: usize, r: f64) -> SdfGrid {
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
                values.push((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - r);
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

fn cube_mesh(edge: f64) -> nsdf_core::infer::MeshSurface {
    let s = edge;
    nsdf_core::infer::MeshSurface {
        vertices: vec![
            [0.0, 0.0, 0.0],
            [s, 0.0, 0.0],
            [s, s, 0.0],
            [0.0, s, 0.0],
            [0.0, 0.0, s],
            [s, 0.0, s],
            [s, s, s],
            [0.0, s, s],
        ],
        triangles: vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [3, 0, 4],
            [3, 4, 7],
        ],
        unit_um: true,
    }
}

#[test]
fn criterion_08_geometry_oracles() {
    let t0 = Instant::now();
    // Sphere r = 0.5 meshed at 64^3.
    let grid = analytic_sphere_grid(64, 0.5);
    let mesh = marching_cubes(&grid, 0.0);
    let area = mesh_area(&mesh);
    let volume = mesh_volume(&mesh);
    let area_ref = 4.0 * std::f64::consts::PI * 0.25;
    let vol_ref = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
    assert!(
        (area / area_ref - 1.0).abs() <= 0.02,
        "criterion 8 FAILED: sphere area {area} vs {area_ref}"
    );
    assert!(
        (volume / vol_ref - 1.0).abs() <= 0.02,
        "criterion 8 FAILED: sphere volume {volume} vs {vol_ref}"
    );
    // Cube sphericity.
    let m = shape_metrics(&cube_mesh(10.0), VolumeMode::Mesh, None).unwrap();
    assert!(
        (m.sphericity - 0.806).abs() <= 0.005,
        "criterion 8 FAILED: cube sphericity {}",
        m.sphericity
    );
    // Scale invariance of sphericity.
    let m2 = shape_metrics(&cube_mesh(23.7), VolumeMode::Mesh, None).unwrap();
    assert!(
        (m.sphericity - m2.sphericity).abs() <= 1e-9,
        "criterion 8 FAILED: sphericity changed under scaling: {} vs {}",
        m.sphericity,
        m2.sphericity
    );
    pass(
        8,
        "marching-cubes sphere within 2%, cube sphericity 0.806±0.005, scale invariance 1e-9",
        &format!(
            "area err {:.4}%, volume err {:.4}%, cube {:.4}, {:.1}s",
            100.0 * (area / area_ref - 1.0).abs(),
            100.0 * (volume / vol_ref - 1.0).abs(),
            m.sphericity,
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: chunk invariance
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_chunk_invariance() {
    let t0 = Instant::now();
    let arch = ArchitectureSpec {
        hidden_layers: 4,
        hidden_width: 24,
        latent_dim: 6,
        latent_inject_layers: vec![1, 3],
        equivariant: true,
        ..ArchitectureSpec::default()
    };
    let mut rng = Stream::new(9009, "acc9", 0);
    let state = init_model(&arch, 1, 1e-4, &mut rng).unwrap();
    let z = state.latents[0].clone();
    let angles = Some(state.angles[0]);
    let mut outputs = Vec::new();
    for chunk in [7usize, 32, 64] {
        let spec = GridSpec {
            dims: (64, 64, 64),
            time_points: vec![-0.3],
            chunk,
            ..GridSpec::default()
        };
        outputs.push(evaluate_grid(&state, &z, angles, &spec).unwrap());
    }
    for other in &outputs[1..] {
        assert_eq!(
            outputs[0][0].values, other[0].values,
            "criterion 9 FAILED: chunk size changed grid values"
        );
    }
    pass(
        9,
        "evaluate_grid identical for chunk in {7, 32, 64} on a 64^3 grid",
        &format!("exact equality, {:.1}s", t0.elapsed().as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 12: KS statistics
// ---------------------------------------------------------------------------

#[test]
fn criterion_12_ks_statistics() {
    let t0 = Instant::now();
    let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.37).collect();
    let (d, p) = ks_two_sample(&x, &x).unwrap();
    assert!(d == 0.0 && p == 1.0, "criterion 12 FAILED: identical samples gave D={d}, p={p}");
    let y: Vec<f64> = x.iter().map(|v| v + 1000.0).collect();
    let (d, _) = ks_two_sample(&x, &y).unwrap();
    assert!(d == 1.0, "criterion 12 FAILED: disjoint supports gave D={d}");

    // Fixed case n=m=100, D=0.2: x = 0..99, y = x + 19.5 gives exactly 0.2.
    let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let ys: Vec<f64> = (0..100).map(|i| i as f64 + 19.5).collect();
    let (d, p) = ks_two_sample(&xs, &ys).unwrap();
    assert!((d - 0.2).abs() < 1e-12, "criterion 12 FAILED: built D={d}, wanted 0.2");
    // Independent oracle: the Kolmogorov series evaluated directly at
    // λ = √(n_eff)·D with n_eff = 50, summed to machine precision.
    let lambda = 50f64.sqrt() * 0.2;
    let mut alt = 0.0;
    for k in 1..=500 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        alt += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    assert!(
        (p - alt).abs() / alt <= 0.02,
        "criterion 12 FAILED: p {p} vs series {alt}"
    );
    // The theta-transformed series agrees too (independent functional form).
    let f = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
    let mut theta = 0.0;
    for k in 0..50 {
        let mm = (2 * k + 1) as f64;
        theta += (-mm * mm * f).exp();
    }
    let p_theta = 1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * theta;
    assert!((p - p_theta).abs() / p_theta <= 0.02);
    assert!((kolmogorov_survival(lambda) - alt).abs() < 1e-12);
    pass(
        12,
        "KS: D=0/p=1 identical, D=1 disjoint, p within 2% of the series oracle",
        &format!("p = {:.6} vs {:.6}, {:.1}s", p, alt, t0.elapsed().as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: reconstruction quality on growing spheres
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_reconstruction_quality() {
    let t0 = Instant::now();
    let fixture = make_fixture(&FixtureSpec {
        kind: FixtureKind::GrowingSphere,
        n_sequences: 8,
        n_time: 10,
        grid: 64,
        seed: 404,
    });
    let data = fixture.grids();
    let arch = ArchitectureSpec::default();
    let cfg = TrainConfig {
        epochs: 500,
        batch_sequences: 5,
        points_per_timepoint: 1200,
        lr: 1e-4,
        seed: 404,
        ..TrainConfig::default()
    };
    let mut rng = Stream::new(404, "init", 0);
    let state = init_model(&arch, 8, cfg.sigma2, &mut rng).unwrap();
    let out = train(state, &data, &cfg, None).unwrap();

    // DSC measured against the same analytic shapes sampled at 48³: the
    // default-width network makes dense 64³ sweeps the dominant cost, and
    // the sphere-boundary sampling difference is far below the 0.90 margin.
    let eval_fixture = make_fixture(&FixtureSpec {
        kind: FixtureKind::GrowingSphere,
        n_sequences: 8,
        n_time: 10,
        grid: 48,
        seed: 404,
    });
    let mut dscs = Vec::new();
    for seq in 0..8 {
        for time in 0..10 {
            let reference = eval_fixture.grid_at(seq, time, None);
            dscs.push(reconstruction_dsc(&out.state, &reference, seq).unwrap());
        }
    }
    let mean = dscs.iter().sum::<f64>() / dscs.len() as f64;
    let min = dscs.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        mean >= 0.90,
        "criterion 4 FAILED: mean reconstruction DSC {mean:.4} < 0.90 (min {min:.4})"
    );
    pass(
        4,
        "default sine arch on 8 growing spheres reaches mean DSC >= 0.90",
        &format!(
            "mean {:.4}, min {:.4}, {:.0}s",
            mean,
            min,
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: equivariant fitting recovers latent and rotation
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_equivariant_fitting() {
    let t0 = Instant::now();
    // Decoder trained on mixed growing-sphere + spiky-star fixtures.
    let spheres = make_fixture(&FixtureSpec {
        kind: FixtureKind::GrowingSphere,
        n_sequences: 4,
        n_time: 6,
        grid: 48,
        seed: 303,
    });
    let stars = make_fixture(&FixtureSpec {
        kind: FixtureKind::SpikyStar,
        n_sequences: 4,
        n_time: 6,
        grid: 48,
        seed: 313,
    });
    let mut data = spheres.grids();
    data.extend(stars.grids());
    let arch = ArchitectureSpec {
        hidden_layers: 6,
        hidden_width: 64,
        latent_dim: 16,
        latent_inject_layers: vec![1, 4, 6],
        equivariant: true,
        ..ArchitectureSpec::default()
    };
    let cfg = TrainConfig {
        epochs: 600,
        batch_sequences: 5,
        points_per_timepoint: 1500,
        lr: 2e-4,
        seed: 303,
        ..TrainConfig::default()
    };
    let mut rng = Stream::new(303, "init", 0);
    let state = init_model(&arch, 8, cfg.sigma2, &mut rng).unwrap();
    let out = train(state, &data, &cfg, None).unwrap();
    let state = out.state;

    // Rotate a held-in spiky sequence (index 4: first star) by a random R~.
    let target_seq = 4usize;
    let mut rot_rng = Stream::new(333, "acc3-rotation", 0);
    let r_tilde = random_rotation(&mut rot_rng);
    let mut points = Vec::new();
    let mut times = Vec::new();
    let mut targets = Vec::new();
    for k in 0..6 {
        let grid = stars.grid_at(0, k, Some(&r_tilde));
        let mut srng = Stream::new(334, "acc3-sample", k as u64);
        let one = vec![vec![grid]];
        let (batch, _) = nsdf_core::sdfdata::draw_training_batch(
            &one,
            &mut srng,
            &nsdf_core::sdfdata::SamplerConfig {
                batch_sequences: 1,
                points_per_timepoint: 600,
                near_threshold_um: 0.6,
            },
        )
        .unwrap();
        points.extend(batch.points);
        times.extend(batch.times);
        targets.extend(batch.targets);
    }
    let fit = fit_latent(
        &state,
        &points,
        &times,
        &targets,
        &FitConfig {
            iterations: 350,
            lr: 5e-3,
            n_restarts: 8,
            sigma2: state.sigma2,
            seed: 335,
            ..FitConfig::default()
        },
    )
    .unwrap();

    let z_orig = &state.latents[target_seq];
    let cosine = {
        let dot: f64 = fit.z.iter().zip(z_orig).map(|(a, b)| a * b).sum();
        let na: f64 = fit.z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = z_orig.iter().map(|v| v * v).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let expected_rot = mat3_mul(&r_tilde, &euler_to_matrix(state.angles[target_seq]));
    let got_rot = euler_to_matrix(fit.angles);
    let geo_deg = geodesic_distance(&expected_rot, &got_rot).to_degrees();
    assert!(
        cosine >= 0.95,
        "criterion 3 FAILED: latent cosine {cosine:.4} < 0.95 (geodesic {geo_deg:.2} deg)"
    );
    assert!(
        geo_deg <= 5.0,
        "criterion 3 FAILED: composed-rotation geodesic {geo_deg:.2} deg > 5 (cosine {cosine:.4})"
    );
    pass(
        3,
        "refit of a rotated held-in sequence recovers its latent and rotation",
        &format!(
            "cosine {:.4}, geodesic {:.2} deg, fit loss {:.5}, {:.0}s",
            cosine,
            geo_deg,
            fit.loss,
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: rotation-ablation direction
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_ablation_direction() {
    let t0 = Instant::now();
    let cfg = AblationConfig {
        n_base: 6,
        n_rotations: 4,
        latent_dims: vec![8],
        seed: 505,
        ..AblationConfig::default()
    };
    let report = run_ablation_equivariance(&cfg).unwrap();
    for (desc, ok) in &report.assertions {
        assert!(*ok, "criterion 5 FAILED: {desc}");
    }
    pass(
        5,
        "rotation-aware model beats the plain one at latent dim 8 with tighter clusters",
        &format!(
            "{}; {:.0}s",
            report
                .assertions
                .iter()
                .map(|(d, _)| d.as_str())
                .collect::<Vec<_>>()
                .join("; "),
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: temporal interpolation floor
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_temporal_interpolation() {
    let t0 = Instant::now();
    let cfg = InterpolationConfig {
        seed: 606,
        ..InterpolationConfig::default()
    };
    let report = run_interpolation_study(&cfg).unwrap();
    for (desc, ok) in &report.assertions {
        assert!(*ok, "criterion 6 FAILED: {desc}");
    }
    pass(
        6,
        "stride-4 training keeps every held-out DSC >= 0.85",
        &format!(
            "{}; {:.0}s",
            report
                .assertions
                .iter()
                .map(|(d, _)| d.as_str())
                .collect::<Vec<_>>()
                .join("; "),
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 10: spectral-bias direction
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_spectral_bias_direction() {
    let t0 = Instant::now();
    let cfg = SpectralConfig {
        omegas: vec![1.0, 30.0],
        seed: 1010,
        ..SpectralConfig::default()
    };
    let report = run_spectral_study(&cfg).unwrap();
    for (desc, ok) in &report.assertions {
        assert!(*ok, "criterion 10 FAILED: {desc}");
    }
    pass(
        10,
        "omega0 = 1 over-smooths (higher sphericity, lower DSC) vs omega0 = 30",
        &format!(
            "{}; {:.0}s",
            report
                .assertions
                .iter()
                .map(|(d, _)| d.as_str())
                .collect::<Vec<_>>()
                .join("; "),
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 11: activation comparison direction
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_activation_comparison() {
    let t0 = Instant::now();
    let cfg = ActivationConfig {
        seed: 1111,
        ..ActivationConfig::default()
    };
    let report = run_activation_comparison(&cfg).unwrap();
    for (desc, ok) in &report.assertions {
        assert!(*ok, "criterion 11 FAILED: {desc}");
    }
    pass(
        11,
        "sine reaches the DSC target in fewer epochs than ReLU",
        &format!(
            "{}; {:.0}s",
            report
                .assertions
                .iter()
                .map(|(d, _)| d.as_str())
                .collect::<Vec<_>>()
                .join("; "),
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Supplementary: end-to-end rotation consistency of synthesized volumes
// ---------------------------------------------------------------------------

#[test]
fn rotation_equivariance_of_voxelized_output() {
    // Voxelize(evaluate(z, R~∘phi0)) must match the R~-rotated voxelization
    // of evaluate(z, phi0) up to mask-resampling error.
    let arch = ArchitectureSpec {
        hidden_layers: 4,
        hidden_width: 32,
        latent_dim: 8,
        latent_inject_layers: vec![1, 3],
        equivariant: true,
        ..ArchitectureSpec::default()
    };
    // A state whose zero set is a meaningful blob: fit a sphere quickly.
    let fixture = make_fixture(&FixtureSpec {
        kind: FixtureKind::SpikyStar,
        n_sequences: 1,
        n_time: 2,
        grid: 32,
        seed: 77,
    });
    let data = fixture.grids();
    let cfg = TrainConfig {
        epochs: 150,
        batch_sequences: 1,
        points_per_timepoint: 1500,
        lr: 3e-4,
        seed: 77,
        ..TrainConfig::default()
    };
    let mut rng = Stream::new(77, "init", 0);
    let state = init_model(&arch, 1, cfg.sigma2, &mut rng).unwrap();
    let out = train(state, &data, &cfg, None).unwrap();
    let state = out.state;

    let mut rot_rng = Stream::new(78, "rot", 0);
    let r_tilde = random_rotation(&mut rot_rng);
    let phi0 = state.angles[0];
    let composed = matrix_to_euler(&mat3_mul(&r_tilde, &euler_to_matrix(phi0)));
    let spec = matching_grid_spec(&data[0][1], 32);
    let base = evaluate_grid(&state, &state.latents[0], Some(phi0), &spec).unwrap();
    let rotated = evaluate_grid(&state, &state.latents[0], Some(composed), &spec).unwrap();
    let mask_base = voxelize(&base[0]);
    let mask_rot = voxelize(&rotated[0]);
    let mask_base_rotated = nsdf_core::infer::rotate_mask(&mask_base, base[0].grid, &r_tilde);
    let d = dice(&mask_rot, rotated[0].grid, &mask_base_rotated, base[0].grid).unwrap();
    assert!(d >= 0.98, "rotated output mask DSC {d:.4} < 0.98");
    println!("[PASS] rotation equivariance end-to-end: DSC {d:.4}");
}
