//! Band extensions of the surface velocity and diffusion tensor in the
//! advection-aligned frame, and numerical checks of their defining identities.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::characteristics::VelocityField;
use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, Surface};

const ZERO_SPEED: f64 = 1e-12;
const TANGENCY_TOL: f64 = 1e-8;
/// Step along the surface for tangential derivatives of curvature entries.
pub const THETA_STEP: f64 = 1e-4;

// 8-point Gauss-Legendre nodes and weights on [-1, 1]
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Orthonormal frame with `t1` along the velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
    pub n: Vector3<f64>,
}

impl Frame {
    /// `B2 = [t1, t2, n]` as columns.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.t1, self.t2, self.n])
    }
}

/// First and second fundamental forms in the frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalForms {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub l: f64,
    pub m: f64,
    pub n: f64,
}

/// Which entries go on the diagonal of the upper block of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionVariant {
    /// `a11 = (1 - rN)^2 + (rM)^2`, `a22 = (1 - rL)^2 + (rM)^2`.
    #[default]
    Adjugate,
    /// `a_ij = (G_X)_ij` in the upper block, i.e. `a11` and `a22` swapped.
    Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardResult {
    pub r: f64,
    pub frame: Frame,
    pub forms: FundamentalForms,
    pub r_matrix: Matrix3<f64>,
    pub metric: Matrix3<f64>,
    pub v_e: Vector3<f64>,
    pub a: Matrix3<f64>,
    pub a33: f64,
}

pub fn advection_frame(surface: &dyn Surface, p: &AmbientPoint, v: &Vector3<f64>) -> Result<Frame> {
    let speed = v.norm();
    if speed <= ZERO_SPEED {
        return Err(Error::ZeroVelocity);
    }
    let n = surface.unit_normal(p)?;
    let normal = v.dot(&n).abs() / speed;
    if normal > TANGENCY_TOL {
        return Err(Error::NonTangential { normal });
    }
    let t1 = v / speed;
    let t2 = n.cross(&t1).normalize();
    Ok(Frame { t1, t2, n })
}

/// Forms with the sign fixed by `d_k N = -(L_k1 T1 + L_k2 T2)`, so the unit
/// sphere has `L = N = -1`.
pub fn fundamental_forms(surface: &dyn Surface, p: &AmbientPoint, frame: &Frame) -> Result<FundamentalForms> {
    let s = surface.local_geometry(p)?.shape;
    let st1 = s * frame.t1;
    let st2 = s * frame.t2;
    Ok(FundamentalForms {
        e: frame.t1.dot(&frame.t1),
        f: frame.t1.dot(&frame.t2),
        g: frame.t2.dot(&frame.t2),
        l: -frame.t1.dot(&st1),
        m: -0.5 * (frame.t2.dot(&st1) + frame.t1.dot(&st2)),
        n: -frame.t2.dot(&st2),
    })
}

pub fn correction_matrix(forms: &FundamentalForms, r: f64) -> Result<Matrix3<f64>> {
    let (l, m, n) = (forms.l, forms.m, forms.n);
    let det = (1.0 - r * l) * (1.0 - r * n) - r * r * m * m;
    if det <= 0.0 {
        return Err(Error::SingularBand { det });
    }
    Ok(Matrix3::new(
        1.0 - r * l,
        -r * m,
        0.0,
        -r * m,
        1.0 - r * n,
        0.0,
        0.0,
        0.0,
        1.0,
    ))
}

/// `G_X` entry by entry.
pub fn metric_tensor(forms: &FundamentalForms, r: f64) -> Matrix3<f64> {
    let (l, m, n) = (forms.l, forms.m, forms.n);
    let g11 = (1.0 - r * l).powi(2) + (r * m).powi(2);
    let g22 = (1.0 - r * n).powi(2) + (r * m).powi(2);
    let g12 = -r * m * (2.0 - r * (l + n));
    Matrix3::new(g11, g12, 0.0, g12, g22, 0.0, 0.0, 0.0, 1.0)
}

/// Upper 2x2 block `(a11, a12, a22)` of `A` at distance `r`.
fn upper_block(forms: &FundamentalForms, r: f64, variant: DiffusionVariant) -> (f64, f64, f64) {
    let (l, m, n) = (forms.l, forms.m, forms.n);
    let from_n = (1.0 - r * n).powi(2) + (r * m).powi(2);
    let from_l = (1.0 - r * l).powi(2) + (r * m).powi(2);
    let a12 = -r * m * (2.0 - r * (l + n));
    match variant {
        DiffusionVariant::Adjugate => (from_n, a12, from_l),
        DiffusionVariant::Metric => (from_l, a12, from_n),
    }
}

/// Splits a band point into its foot point and signed distance.
fn foot(surface: &dyn Surface, x: &AmbientPoint) -> Result<(AmbientPoint, f64, Vector3<f64>)> {
    let p = surface.closest_point(x)?;
    let n = surface.unit_normal(&p)?;
    let d = x - p;
    Ok((p, d.norm().copysign(n.dot(&d)), n))
}

/// `v_E = B2 R [|v|, 0, 0]^T` with the frame built at `cp(x)` from `v_m`.
pub fn pushforward_velocity(surface: &dyn Surface, x: &AmbientPoint, v_m: &Vector3<f64>) -> Result<Vector3<f64>> {
    let (p, r, _) = foot(surface, x)?;
    let frame = advection_frame(surface, &p, v_m)?;
    let forms = fundamental_forms(surface, &p, &frame)?;
    let rm = correction_matrix(&forms, r)?;
    Ok(frame.matrix() * rm * Vector3::new(v_m.norm(), 0.0, 0.0))
}

/// Forms in the advection frame at a surface point.
fn forms_at(surface: &dyn Surface, velocity: &VelocityField, p: &AmbientPoint, t: f64) -> Result<(Frame, FundamentalForms)> {
    let v = velocity.eval(surface, p, t)?;
    let frame = advection_frame(surface, p, &v)?;
    let forms = fundamental_forms(surface, p, &frame)?;
    Ok((frame, forms))
}

/// Central differences of the upper block along `t1` and `t2` at distance
/// `s`: returns `[d_1 (a11, a12, a22), d_2 (a11, a12, a22)]`.
#[allow(clippy::too_many_arguments)]
fn block_derivatives(
    surface: &dyn Surface,
    velocity: &VelocityField,
    p: &AmbientPoint,
    frame: &Frame,
    t: f64,
    h: f64,
    variant: DiffusionVariant,
    radii: &[f64],
) -> Result<Vec<[[f64; 3]; 2]>> {
    let mut out = vec![[[0.0; 3]; 2]; radii.len()];
    for (k, dir) in [frame.t1, frame.t2].iter().enumerate() {
        let qp = surface.closest_point(&(p + h * dir))?;
        let qm = surface.closest_point(&(p - h * dir))?;
        let (_, fp) = forms_at(surface, velocity, &qp, t)?;
        let (_, fm) = forms_at(surface, velocity, &qm, t)?;
        let span = (qp - qm).norm();
        for (j, &s) in radii.iter().enumerate() {
            let bp = upper_block(&fp, s, variant);
            let bm = upper_block(&fm, s, variant);
            out[j][k] = [(bp.0 - bm.0) / span, (bp.1 - bm.1) / span, (bp.2 - bm.2) / span];
        }
    }
    Ok(out)
}

/// Options for [`pushforward_diffusion`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionOptions {
    pub a33: f64,
    pub variant: DiffusionVariant,
    pub theta_step: f64,
    pub t: f64,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        DiffusionOptions {
            a33: 1.0,
            variant: DiffusionVariant::Adjugate,
            theta_step: THETA_STEP,
            t: 0.0,
        }
    }
}

/// Full push-forward data at a band point: frame, forms, `R`, `G_X`, `v_E`
/// and the diffusion tensor `A`.
pub fn pushforward(surface: &dyn Surface, velocity: &VelocityField, x: &AmbientPoint, opts: &DiffusionOptions) -> Result<PushforwardResult> {
    let (p, r, _) = foot(surface, x)?;
    pushforward_at(surface, velocity, &p, r, opts)
}

/// As [`pushforward`], for the band point `p + r N(p)` of a surface point `p`.
pub fn pushforward_at(
    surface: &dyn Surface,
    velocity: &VelocityField,
    p: &AmbientPoint,
    r: f64,
    opts: &DiffusionOptions,
) -> Result<PushforwardResult> {
    let v = velocity.eval(surface, p, opts.t)?;
    let frame = advection_frame(surface, p, &v)?;
    let forms = fundamental_forms(surface, p, &frame)?;
    let r_matrix = correction_matrix(&forms, r)?;
    let metric = r_matrix * r_matrix.transpose();
    let v_e = frame.matrix() * r_matrix * Vector3::new(v.norm(), 0.0, 0.0);

    let (a11, a12, a22) = upper_block(&forms, r, opts.variant);
    // a3i(r) = int_0^r -(d_1 a_1i + d_2 a_2i) ds
    let radii: Vec<f64> = GL_NODES.iter().map(|x| 0.5 * r * (x + 1.0)).collect();
    let (a31, a32) = if r == 0.0 {
        (0.0, 0.0)
    } else {
        let d = block_derivatives(surface, velocity, p, &frame, opts.t, opts.theta_step, opts.variant, &radii)?;
        let mut a31 = 0.0;
        let mut a32 = 0.0;
        for (w, dj) in GL_WEIGHTS.iter().zip(&d) {
            // d_1 a_11 + d_2 a_21 and d_1 a_12 + d_2 a_22
            a31 -= w * (dj[0][0] + dj[1][1]);
            a32 -= w * (dj[0][1] + dj[1][2]);
        }
        (0.5 * r * a31, 0.5 * r * a32)
    };
    let a = Matrix3::new(a11, a12, a31, a12, a22, a32, a31, a32, opts.a33);
    Ok(PushforwardResult {
        r,
        frame,
        forms,
        r_matrix,
        metric,
        v_e,
        a,
        a33: opts.a33,
    })
}

/// Diffusion tensor `A` at a band point.
pub fn pushforward_diffusion(surface: &dyn Surface, velocity: &VelocityField, x: &AmbientPoint, opts: &DiffusionOptions) -> Result<Matrix3<f64>> {
    Ok(pushforward(surface, velocity, x, opts)?.a)
}

/// One line of an identity report.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityRow {
    pub identity: String,
    pub surface: String,
    pub r: f64,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityReport {
    pub rows: Vec<IdentityRow>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    fn push_max(&mut self, identity: &str, surface: &str, r: f64, residual: f64, threshold: f64) {
        self.rows.push(IdentityRow {
            identity: identity.to_string(),
            surface: surface.to_string(),
            r,
            residual,
            threshold,
            pass: residual <= threshold,
        });
    }

    /// Largest residual of an identity across all offsets.
    pub fn max_residual(&self, identity: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.identity == identity)
            .map(|r| r.residual)
            .reduce(f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["identity", "surface", "r", "residual", "threshold", "pass"])?;
        for row in &self.rows {
            w.write_record([
                row.identity.clone(),
                row.surface.clone(),
                format!("{:.16e}", row.r),
                format!("{:.16e}", row.residual),
                format!("{:.16e}", row.threshold),
                row.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sampling and tolerance settings for [`check_identities`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub offsets: Vec<f64>,
    pub a33: f64,
    /// Finite-difference steps for the ODE residual, coarse to fine.
    pub fd_steps: Vec<f64>,
    pub exact_tol: f64,
    pub can_tol: f64,
    pub can_step: f64,
    pub min_order: f64,
    pub variants: Vec<DiffusionVariant>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            offsets: vec![-0.1, -0.05, 0.05, 0.1],
            a33: 1.0,
            fd_steps: vec![2e-2, 1e-2, 5e-3],
            exact_tol: 1e-12,
            can_tol: 1e-6,
            can_step: 1e-4,
            min_order: 1.8,
            variants: vec![DiffusionVariant::Adjugate, DiffusionVariant::Metric],
        }
    }
}

/// Residual of `d_r a3i + d_1 a1i + d_2 a2i = 0` by central differences with
/// step `h`, at the band point `p + r N`.
fn ode_residual(
    surface: &dyn Surface,
    velocity: &VelocityField,
    p: &AmbientPoint,
    r: f64,
    h: f64,
    opts: &DiffusionOptions,
) -> Result<f64> {
    let plus = pushforward_at(surface, velocity, p, r + h, opts)?.a;
    let minus = pushforward_at(surface, velocity, p, r - h, opts)?.a;
    let dr = (plus - minus) / (2.0 * h);
    let (frame, _) = forms_at(surface, velocity, p, opts.t)?;
    let d = block_derivatives(surface, velocity, p, &frame, opts.t, h, opts.variant, &[r])?;
    let res1 = dr[(2, 0)] + d[0][0][0] + d[0][1][1];
    let res2 = dr[(2, 1)] + d[0][0][1] + d[0][1][2];
    Ok(res1.abs().max(res2.abs()))
}

/// Numerical checks at band points `p + r N(p)` for every sample surface
/// point `p` and offset `r`:
///
/// * `metric`: `G_X` from its entry formulas against `R R^T`;
/// * `a_at_zero`: `A(0)` against `diag(1, 1, a33)`;
/// * `ode_a3[...]`: residual of the a3i transport equation, with its observed
///   order under step halving reported as `ode_a3_order[...]`;
/// * `ve_normal`: `v_E . N`;
/// * `can_normal`: normal derivative of a constant-along-normal extension;
/// * `a_symmetric`: `A - A^T`.
pub fn check_identities(
    surface: &dyn Surface,
    velocity: &VelocityField,
    points: &[AmbientPoint],
    spec: &SampleSpec,
) -> Result<IdentityReport> {
    let name = surface.name();
    let mut report = IdentityReport::default();
    let base = DiffusionOptions {
        a33: spec.a33,
        ..DiffusionOptions::default()
    };

    let mut at_zero: f64 = 0.0;
    for p in points {
        let res = pushforward_at(surface, velocity, p, 0.0, &base)?;
        let want = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, spec.a33));
        at_zero = at_zero.max((res.a - want).amax());
    }
    report.push_max("a_at_zero", &name, 0.0, at_zero, spec.exact_tol);

    for &r in &spec.offsets {
        let mut metric: f64 = 0.0;
        let mut ve: f64 = 0.0;
        let mut can: f64 = 0.0;
        let mut sym: f64 = 0.0;
        let mut a3_max: f64 = 0.0;
        for p in points {
            let res = pushforward_at(surface, velocity, p, r, &base)?;
            metric = metric.max((metric_tensor(&res.forms, r) - res.r_matrix * res.r_matrix.transpose()).amax());
            ve = ve.max(res.v_e.dot(&res.frame.n).abs());
            sym = sym.max((res.a - res.a.transpose()).amax());
            a3_max = a3_max.max(res.a[(2, 0)].abs()).max(res.a[(2, 1)].abs());
            // u_E(x) = first coordinate of cp(x)
            let x = p + r * res.frame.n;
            let h = spec.can_step;
            let up = surface.closest_point(&(x + h * res.frame.n))?[0];
            let um = surface.closest_point(&(x - h * res.frame.n))?[0];
            can = can.max(((up - um) / (2.0 * h)).abs());
        }
        report.push_max("metric", &name, r, metric, spec.exact_tol);
        report.push_max("ve_normal", &name, r, ve, spec.exact_tol);
        report.push_max("can_normal", &name, r, can, spec.can_tol);
        report.push_max("a_symmetric", &name, r, sym, spec.exact_tol);
        report.rows.push(IdentityRow {
            identity: "a3_max".into(),
            surface: name.clone(),
            r,
            residual: a3_max,
            threshold: f64::INFINITY,
            pass: true,
        });

        for &variant in &spec.variants {
            let tag = match variant {
                DiffusionVariant::Adjugate => "adjugate",
                DiffusionVariant::Metric => "metric",
            };
            let opts = DiffusionOptions { variant, ..base };
            let mut residuals = Vec::with_capacity(spec.fd_steps.len());
            for &h in &spec.fd_steps {
                let mut worst: f64 = 0.0;
                for p in points {
                    worst = worst.max(ode_residual(surface, velocity, p, r, h, &opts)?);
                }
                residuals.push(worst);
                report.rows.push(IdentityRow {
                    identity: format!("ode_a3[{tag}] h={h:e}"),
                    surface: name.clone(),
                    r,
                    residual: worst,
                    threshold: f64::INFINITY,
                    pass: true,
                });
            }
            let order = observed_order(&residuals, &spec.fd_steps);
            report.rows.push(IdentityRow {
                identity: format!("ode_a3_order[{tag}]"),
                surface: name.clone(),
                r,
                residual: order,
                threshold: spec.min_order,
                // residuals already at round-off need no order
                pass: order >= spec.min_order || residuals.last().is_some_and(|&e| e <= 1e-10),
            });
        }
    }
    Ok(report)
}

/// Least-squares slope of `log e` against `log h`.
fn observed_order(errors: &[f64], steps: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .zip(steps)
        .filter(|(e, _)| **e > 0.0)
        .map(|(e, h)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
