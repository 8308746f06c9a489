//! Singular initial data and their mollified particle realizations.

use serde::{Deserialize, Serialize};

use super::kernel::{unit_peak, KernelDim, MollifierKernel};
use super::sampling::{jitter, Kronecker};
use crate::error::{Result, VpError};
use crate::radial_field::RadialGrid;

/// The sup-norm budget constant: mollified data satisfy `sup f <= C / s`.
///
/// Twice the peak of the unit 3D bump, since every construction below targets
/// exactly that peak over `s`.
pub fn construction_constant() -> f64 {
    2.0 * unit_peak(KernelDim::Three)
}

/// Fewer particles than this per kernel half-width flags an ensemble.
const MIN_PER_HALF_WIDTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialProfile {
    UniformBall {
        radius: f64,
    },
    /// `rho` proportional to `1 - r^2 / R^2`.
    Parabolic {
        radius: f64,
    },
}

impl RadialProfile {
    pub fn radius(&self) -> f64 {
        match *self {
            RadialProfile::UniformBall { radius } | RadialProfile::Parabolic { radius } => radius,
        }
    }

    /// Density at `r` for unit total mass.
    pub fn unit_density(&self, r: f64) -> f64 {
        let big_r = self.radius();
        if r >= big_r || r < 0.0 {
            return 0.0;
        }
        let vol = big_r.powi(3);
        match self {
            RadialProfile::UniformBall { .. } => 3.0 / (4.0 * std::f64::consts::PI * vol),
            RadialProfile::Parabolic { .. } => {
                let x = r / big_r;
                15.0 / (8.0 * std::f64::consts::PI * vol) * (1.0 - x * x)
            }
        }
    }

    /// Largest value of [`Self::unit_density`].
    pub fn unit_peak(&self) -> f64 {
        self.unit_density(0.0)
    }

    /// sup |d rho / dr| for unit mass, not counting the jump at the edge.
    pub fn unit_slope(&self) -> f64 {
        match self {
            RadialProfile::UniformBall { .. } => 0.0,
            RadialProfile::Parabolic { .. } => 2.0 * self.unit_peak() / self.radius(),
        }
    }

    /// Fraction of the mass inside `r`.
    pub fn mass_fraction(&self, r: f64) -> f64 {
        let x = (r / self.radius()).clamp(0.0, 1.0);
        match self {
            RadialProfile::UniformBall { .. } => x * x * x,
            RadialProfile::Parabolic { .. } => 0.5 * (5.0 * x.powi(3) - 3.0 * x.powi(5)),
        }
    }

    /// Radius enclosing mass fraction `u`.
    pub fn fraction_inverse(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let big_r = self.radius();
        match self {
            RadialProfile::UniformBall { .. } => big_r * u.cbrt(),
            RadialProfile::Parabolic { .. } => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if 0.5 * (5.0 * mid.powi(3) - 3.0 * mid.powi(5)) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                big_r * 0.5 * (lo + hi)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let r = self.radius();
        if r > 0.0 && r.is_finite() {
            Ok(())
        } else {
            Err(VpError::invalid("radius", format!("{r} (must be > 0)")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityField {
    Zero,
    /// `w0(r) = rate * r`.
    Hubble {
        rate: f64,
    },
}

impl VelocityField {
    pub fn at(&self, r: f64) -> f64 {
        match *self {
            VelocityField::Zero => 0.0,
            VelocityField::Hubble { rate } => rate * r,
        }
    }

    fn rate(&self) -> f64 {
        match *self {
            VelocityField::Zero => 0.0,
            VelocityField::Hubble { rate } => rate.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shell {
    pub radius: f64,
    pub velocity: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumShape {
    /// `f = mass * k_R(x) * k_V(v)` with 3D bumps of half-widths `radius` and
    /// `velocity_width`.
    Smooth {
        mass: f64,
        radius: f64,
        velocity_width: f64,
    },
    /// `f = rho0(x) delta(v - w0(x) x/|x|)`.
    ColdMonokinetic {
        mass: f64,
        profile: RadialProfile,
        velocity: VelocityField,
    },
    /// Sum of `m_k delta(|x| - r_k) delta(v - v_k x/|x|)` over shells.
    ShellSum { shells: Vec<Shell> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularDatum {
    pub shape: DatumShape,
    /// +1 attractive, -1 repulsive, 0 switches the field off.
    pub gamma: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(VpError::invalid(
            name,
            format!("{v} (must be > 0 and finite)"),
        ))
    }
}

impl SingularDatum {
    pub fn new(shape: DatumShape, gamma: f64) -> Result<Self> {
        let d = SingularDatum { shape, gamma };
        d.validate()?;
        Ok(d)
    }

    pub fn cold_ball(mass: f64, radius: f64, gamma: f64) -> Result<Self> {
        Self::new(
            DatumShape::ColdMonokinetic {
                mass,
                profile: RadialProfile::UniformBall { radius },
                velocity: VelocityField::Zero,
            },
            gamma,
        )
    }

    pub fn shells(shells: Vec<Shell>, gamma: f64) -> Result<Self> {
        Self::new(DatumShape::ShellSum { shells }, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if ![-1.0, 0.0, 1.0].contains(&self.gamma) {
            return Err(VpError::invalid(
                "gamma",
                format!("{} (expected -1, 0 or 1)", self.gamma),
            ));
        }
        match &self.shape {
            DatumShape::Smooth {
                mass,
                radius,
                velocity_width,
            } => {
                positive("mass", *mass)?;
                positive("radius", *radius)?;
                positive("velocity_width", *velocity_width)
            }
            DatumShape::ColdMonokinetic {
                mass,
                profile,
                velocity,
            } => {
                positive("mass", *mass)?;
                profile.validate()?;
                if let VelocityField::Hubble { rate } = velocity {
                    if !rate.is_finite() {
                        return Err(VpError::invalid("rate", "not finite"));
                    }
                }
                Ok(())
            }
            DatumShape::ShellSum { shells } => {
                if shells.is_empty() {
                    return Err(VpError::invalid("shells", "empty list"));
                }
                for sh in shells {
                    positive("shell radius", sh.radius)?;
                    positive("shell mass", sh.mass)?;
                    if !sh.velocity.is_finite() {
                        return Err(VpError::invalid("shell velocity", "not finite"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        match &self.shape {
            DatumShape::Smooth { mass, .. } | DatumShape::ColdMonokinetic { mass, .. } => *mass,
            DatumShape::ShellSum { shells } => shells.iter().map(|s| s.mass).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub r: f64,
    pub vr: f64,
    /// Modulus of the angular momentum per unit mass.
    pub l: f64,
    pub m: f64,
}

impl Particle {
    /// Speed `sqrt(vr^2 + (L/r)^2)`; purely radial particles at the center
    /// have speed `|vr|`.
    pub fn speed(&self) -> f64 {
        if self.l == 0.0 {
            self.vr.abs()
        } else {
            let vt = self.l / self.r;
            (self.vr * self.vr + vt * vt).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub particles: Vec<Particle>,
    /// Mollification width `s`.
    pub width: f64,
    pub gamma: f64,
    /// Exactly the sum of the particle weights.
    pub total_mass: f64,
    /// Realized `sup f` of the mollified datum.
    pub fvalue_cap: f64,
    /// Realized sup of the first derivatives of the mollified datum (see
    /// [`regularize`] for which derivatives each shape counts).
    pub derivative_cap: f64,
    /// Largest velocity kernel half-width used.
    pub velocity_width: f64,
    /// Smallest radial kernel half-width used, zero if radii are not mollified.
    pub radial_width: f64,
    pub under_resolved: bool,
}

impl ParticleEnsemble {
    /// Builds an ensemble from explicit particles, with no mollification
    /// metadata. Useful for tests and hand-made configurations.
    pub fn from_particles(particles: Vec<Particle>, gamma: f64) -> Self {
        let total_mass = particles.iter().map(|p| p.m).sum();
        ParticleEnsemble {
            particles,
            width: 1.0,
            gamma,
            total_mass,
            fvalue_cap: f64::NAN,
            derivative_cap: f64::NAN,
            velocity_width: 0.0,
            radial_width: 0.0,
            under_resolved: false,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.particles.iter().map(|p| p.r).fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.particles
            .iter()
            .map(Particle::speed)
            .fold(0.0, f64::max)
    }
}

/// Decomposes `total` as `K * q` with `q` a power of two and `K < 2^53`.
fn quantize(total: f64) -> (u64, f64) {
    let bits = total.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        // subnormal: quantum is the smallest subnormal
        (frac, f64::from_bits(1))
    } else {
        (frac | (1u64 << 52), 2f64.powi(exp - 1075))
    }
}

/// Splits the integer `k` in proportion to `weights` by largest remainder.
fn apportion(k: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let ideal: Vec<f64> = weights.iter().map(|w| k as f64 * w / sum).collect();
    let mut out: Vec<u64> = ideal.iter().map(|x| x.floor() as u64).collect();
    let mut assigned: u64 = out.iter().sum();
    while assigned > k {
        let i = (0..out.len()).max_by_key(|&i| out[i]).unwrap();
        out[i] -= 1;
        assigned -= 1;
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - out[a] as f64;
        let rb = ideal[b] - out[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut it = order.iter().cycle();
    while assigned < k {
        out[*it.next().unwrap()] += 1;
        assigned += 1;
    }
    out
}

/// Particle weights that partition `total` exactly: all weights are integer
/// multiples of one power-of-two quantum, so every partial sum is exact and
/// independent of summation order. `groups` lists (group weight, particle count).
fn exact_weights(total: f64, groups: &[(f64, usize)]) -> Vec<f64> {
    let (k, q) = quantize(total);
    let shares: Vec<f64> = groups.iter().map(|g| g.0).collect();
    let per_group = apportion(k, &shares);
    let mut out = Vec::new();
    for (&kg, &(_, n)) in per_group.iter().zip(groups) {
        let n = n as u64;
        let base = kg / n;
        let extra = kg % n;
        for i in 0..n {
            let units = base + u64::from(i < extra);
            out.push(units as f64 * q);
        }
    }
    out
}

/// Kernel widths and realized peaks of one mollified shell.
#[derive(Debug, Clone, Copy)]
struct ShellWidths {
    radial: f64,
    velocity: f64,
    peak: f64,
    slope: f64,
}

/// `max_r k1(r - r_k) / (4 pi r^2)` and the sup of its radial derivative.
fn shell_profile_peaks(radius: f64, k1: &MollifierKernel) -> (f64, f64) {
    let w = k1.width();
    let g = |t: f64| {
        let r = radius + t * w;
        k1.value(t * w) / (4.0 * std::f64::consts::PI * r * r)
    };
    const SCAN: usize = 800;
    let mut best = 0.0f64;
    let mut best_t = 0.0;
    let mut slope = 0.0f64;
    let mut prev = g(-1.0);
    for i in 1..=SCAN {
        let t = -1.0 + 2.0 * i as f64 / SCAN as f64;
        let v = g(t);
        slope = slope.max((v - prev).abs() / (2.0 * w / SCAN as f64));
        prev = v;
        if v > best {
            best = v;
            best_t = t;
        }
    }
    // golden-section refinement around the scanned maximum
    let h = 2.0 / SCAN as f64;
    let (mut a, mut b) = ((best_t - h).max(-1.0), (best_t + h).min(1.0));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (best.max(g(0.5 * (a + b))), slope)
}

/// Solves for the kernel widths of one shell so that its mollified peak equals
/// the target. The radial width is tied to the velocity width by
/// `w_r = w_v^2`.
fn shell_widths(shell: &Shell, target: f64) -> Result<ShellWidths> {
    let peak_for = |wv: f64| -> Result<(f64, f64)> {
        let k1 = MollifierKernel::new(wv * wv, KernelDim::One)?;
        let (g, g_slope) = shell_profile_peaks(shell.radius, &k1);
        Ok((
            shell.mass * unit_peak(KernelDim::Three) / wv.powi(3) * g,
            g_slope,
        ))
    };
    let wv_max = shell.radius.sqrt() * (1.0 - 1e-9);
    let (peak_at_max, _) = peak_for(wv_max)?;
    if peak_at_max > target {
        return Err(VpError::ShellTouchesOrigin {
            radius: shell.radius,
            width: shell.radius,
        });
    }
    let (mut lo, mut hi) = (wv_max * 1e-6, wv_max);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if peak_for(mid)?.0 > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    let wv = hi;
    let (peak, g_slope) = peak_for(wv)?;
    let k3 = MollifierKernel::new(wv, KernelDim::Three)?;
    let g = peak / (shell.mass * k3.peak());
    let slope = shell.mass * (g_slope * k3.peak() + g * k3.derivative_peak());
    Ok(ShellWidths {
        radial: wv * wv,
        velocity: wv,
        peak,
        slope,
    })
}

/// Speed-direction pair from a kernel draw: returns `(vr offset, tangential speed)`.
fn velocity_offset(k3: &MollifierKernel, u_mag: f64, u_cos: f64) -> (f64, f64) {
    let a = k3.offset_quantile(u_mag);
    let c = 2.0 * u_cos - 1.0;
    (a * c, a * (1.0 - c * c).max(0.0).sqrt())
}

/// Mollifies `datum` at width `s` and samples it with `n` particles.
///
/// * Cold data keep `rho0` and spread the velocity delta with a 3D bump of
///   half-width `w_v = (s * sup rho0)^(1/3)`, which puts the peak of `f` at
///   exactly `P / s` (`P` the unit bump peak). `derivative_cap` counts
///   `d/dv` and the smooth part of `d/dr`.
/// * Shells are spread in `r` (1D bump, `w_r`) and in `v` (3D bump, `w_v`),
///   with `w_r = w_v^2` and `w_v` solved so that the peak is again `P / s`.
/// * Smooth data are sampled as given; `s` is only recorded.
///
/// Radii come from stratified mass quantiles and velocities from a shifted
/// low-discrepancy sequence, both keyed by `(seed, index)`.
pub fn regularize(datum: &SingularDatum, s: f64, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    datum.validate()?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(VpError::invalid("s", format!("{s} not in (0, 1]")));
    }
    if n == 0 {
        return Err(VpError::invalid("n_particles", "must be >= 1"));
    }
    let total = datum.total_mass();
    let kron = Kronecker::new(seed);
    let target = unit_peak(KernelDim::Three) / s;
    let stratum = |i: usize, count: usize, global: usize| {
        (i as f64 + jitter(seed, global as u64)) / count as f64
    };

    let mut particles = Vec::with_capacity(n);
    let (fvalue_cap, derivative_cap, velocity_width, radial_width, under_resolved);
    match &datum.shape {
        DatumShape::Smooth {
            mass,
            radius,
            velocity_width: vw,
        } => {
            let kx = MollifierKernel::new(*radius, KernelDim::Three)?;
            let kv = MollifierKernel::new(*vw, KernelDim::Three)?;
            let weights = exact_weights(*mass, &[(1.0, n)]);
            for (i, m) in weights.into_iter().enumerate() {
                let r = kx.offset_quantile(stratum(i, n, i));
                let [u1, u2] = kron.point(i as u64);
                let (vr, vt) = velocity_offset(&kv, u1, u2);
                particles.push(Particle {
                    r,
                    vr,
                    l: r * vt,
                    m,
                });
            }
            fvalue_cap = mass * kx.peak() * kv.peak();
            derivative_cap =
                mass * (kx.derivative_peak() * kv.peak() + kx.peak() * kv.derivative_peak());
            velocity_width = *vw;
            radial_width = 0.0;
            under_resolved = n < MIN_PER_HALF_WIDTH;
        }
        DatumShape::ColdMonokinetic {
            mass,
            profile,
            velocity,
        } => {
            let rho_max = mass * profile.unit_peak();
            let wv = (s * rho_max).cbrt();
            let kv = MollifierKernel::new(wv, KernelDim::Three)?;
            let weights = exact_weights(*mass, &[(1.0, n)]);
            for (i, m) in weights.into_iter().enumerate() {
                let r = profile.fraction_inverse(stratum(i, n, i));
                let [u1, u2] = kron.point(i as u64);
                let (dv, vt) = velocity_offset(&kv, u1, u2);
                particles.push(Particle {
                    r,
                    vr: velocity.at(r) + dv,
                    l: r * vt,
                    m,
                });
            }
            fvalue_cap = rho_max * kv.peak();
            derivative_cap = rho_max * kv.derivative_peak() * (1.0 + velocity.rate())
                + mass * profile.unit_slope() * kv.peak();
            velocity_width = wv;
            radial_width = 0.0;
            under_resolved = n < MIN_PER_HALF_WIDTH;
        }
        DatumShape::ShellSum { shells } => {
            if n < shells.len() {
                return Err(VpError::invalid(
                    "n_particles",
                    format!("{n} is fewer than the {} shells", shells.len()),
                ));
            }
            let widths: Vec<ShellWidths> = shells
                .iter()
                .map(|sh| shell_widths(sh, target))
                .collect::<Result<_>>()?;
            let masses: Vec<f64> = shells.iter().map(|sh| sh.mass).collect();
            let mut counts: Vec<usize> = apportion((n - shells.len()) as u64, &masses)
                .into_iter()
                .map(|c| c as usize + 1)
                .collect();
            // keep the total at n even if rounding in apportion drifted
            let drift = counts.iter().sum::<usize>() as i64 - n as i64;
            if drift != 0 {
                let last = counts.len() - 1;
                counts[last] = (counts[last] as i64 - drift) as usize;
            }
            let groups: Vec<(f64, usize)> =
                masses.iter().copied().zip(counts.iter().copied()).collect();
            let weights = exact_weights(total, &groups);
            let mut global = 0usize;
            for ((sh, w), &count) in shells.iter().zip(&widths).zip(&counts) {
                let kr = MollifierKernel::new(w.radial, KernelDim::One)?;
                let kv = MollifierKernel::new(w.velocity, KernelDim::Three)?;
                for i in 0..count {
                    let r = sh.radius + kr.offset_quantile(stratum(i, count, global));
                    let [u1, u2] = kron.point(global as u64);
                    let (dv, vt) = velocity_offset(&kv, u1, u2);
                    particles.push(Particle {
                        r,
                        vr: sh.velocity + dv,
                        l: r * vt,
                        m: weights[global],
                    });
                    global += 1;
                }
            }
            // overlapping shells add their peaks
            let mut cap = 0.0f64;
            let mut dcap = 0.0f64;
            for (i, (a, wa)) in shells.iter().zip(&widths).enumerate() {
                let (mut sum, mut dsum) = (0.0, 0.0);
                for (j, (b, wb)) in shells.iter().zip(&widths).enumerate() {
                    let overlap_r = (a.radius - b.radius).abs() < wa.radial + wb.radial;
                    let overlap_v = (a.velocity - b.velocity).abs() < wa.velocity + wb.velocity;
                    if i == j || (overlap_r && overlap_v) {
                        sum += wb.peak;
                        dsum += wb.slope;
                    }
                }
                cap = cap.max(sum);
                dcap = dcap.max(dsum);
            }
            fvalue_cap = cap;
            derivative_cap = dcap;
            velocity_width = widths.iter().map(|w| w.velocity).fold(0.0, f64::max);
            radial_width = widths
                .iter()
                .map(|w| w.radial)
                .fold(f64::INFINITY, f64::min);
            under_resolved = counts.iter().any(|&c| c < 2 * MIN_PER_HALF_WIDTH);
        }
    }

    Ok(ParticleEnsemble {
        total_mass: particles.iter().map(|p| p.m).sum(),
        particles,
        width: s,
        gamma: datum.gamma,
        fvalue_cap,
        derivative_cap,
        velocity_width,
        radial_width,
        under_resolved,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatumNorms {
    pub l1: f64,
    pub linf_f: f64,
    pub r_max: f64,
    pub v_max: f64,
}

/// Mass, binned estimate of `sup f`, and support radii of an ensemble.
///
/// `f` is binned in `(r, |v|)`: radial bins are the grid cells, speed bins
/// have width `w_v / 4` (or `v_max / 32` without a velocity kernel). A bin's
/// phase-space volume is `(4 pi / 3) d(r^3) * (4 pi / 3) d(w^3)`.
pub fn datum_norms(ensemble: &ParticleEnsemble, grid: &RadialGrid) -> DatumNorms {
    let l1 = ensemble.particles.iter().map(|p| p.m).sum();
    let r_max = ensemble.max_radius();
    let v_max = ensemble.max_speed();
    let dw = if ensemble.velocity_width > 0.0 {
        ensemble.velocity_width / 4.0
    } else {
        (v_max / 32.0).max(f64::MIN_POSITIVE)
    };
    let nodes = grid.nodes();
    let n_r = nodes.len() - 1;
    let n_w = (v_max / dw).floor() as usize + 1;
    let mut mass = vec![0.0f64; n_r * n_w];
    for p in &ensemble.particles {
        let j = grid.bin_of(p.r).unwrap_or(n_r - 1);
        let k = ((p.speed() / dw).floor() as usize).min(n_w - 1);
        mass[j * n_w + k] += p.m;
    }
    let four_thirds_pi = 4.0 / 3.0 * std::f64::consts::PI;
    let mut linf = 0.0f64;
    for j in 0..n_r {
        let vol_r = four_thirds_pi * (nodes[j + 1].powi(3) - nodes[j].powi(3));
        for k in 0..n_w {
            let m = mass[j * n_w + k];
            if m > 0.0 {
                let (w0, w1) = (k as f64 * dw, (k + 1) as f64 * dw);
                let vol_w = four_thirds_pi * (w1.powi(3) - w0.powi(3));
                linf = linf.max(m / (vol_r * vol_w));
            }
        }
    }
    DatumNorms {
        l1,
        linf_f: linf,
        r_max,
        v_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_is_exact() {
        for total in [1.0, 0.3, 7.25, 1e-7, 123456.789] {
            let (k, q) = quantize(total);
            assert_eq!(k as f64 * q, total);
            assert!(k < (1u64 << 53));
        }
    }

    #[test]
    fn apportion_sums_exactly() {
        let parts = apportion(1_000_003, &[0.2, 0.5, 0.3]);
        assert_eq!(parts.iter().sum::<u64>(), 1_000_003);
        assert!((parts[1] as f64 - 500_001.5).abs() <= 1.0);
    }

    #[test]
    fn exact_weights_partition_in_any_order() {
        let w = exact_weights(0.1, &[(1.0, 7)]);
        let fwd: f64 = w.iter().sum();
        let rev: f64 = w.iter().rev().sum();
        assert_eq!(fwd, 0.1);
        assert_eq!(rev, 0.1);
        let w = exact_weights(1.0, &[(0.3, 3), (0.7, 11)]);
        assert_eq!(w.len(), 14);
        assert_eq!(w.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn parabolic_inverse_round_trips() {
        let p = RadialProfile::Parabolic { radius: 2.0 };
        for u in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let r = p.fraction_inverse(u);
            assert!((p.mass_fraction(r) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_must_be_a_sign() {
        assert!(SingularDatum::cold_ball(1.0, 1.0, 2.0).is_err());
        assert!(SingularDatum::cold_ball(1.0, 1.0, 0.0).is_ok());
        assert!(SingularDatum::cold_ball(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn cold_velocity_width_hits_the_budget() {
        let d = SingularDatum::cold_ball(1.0, 1.0, 1.0).unwrap();
        let e = regularize(&d, 0.25, 100, 0).unwrap();
        assert!((e.fvalue_cap * 0.25 / unit_peak(KernelDim::Three) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shell_widths_hit_the_target() {
        let sh = Shell {
            radius: 1.0,
            velocity: 0.0,
            mass: 1.0,
        };
        let w = shell_widths(&sh, 10.0).unwrap();
        assert!((w.peak / 10.0 - 1.0).abs() < 1e-9);
        assert!((w.radial - w.velocity * w.velocity).abs() < 1e-15);
    }

    #[test]
    fn tiny_shell_touches_origin() {
        let sh = Shell {
            radius: 0.01,
            velocity: 0.0,
            mass: 1.0,
        };
        assert!(matches!(
            shell_widths(&sh, 1.0),
            Err(VpError::ShellTouchesOrigin { .. })
        ));
    }
}
