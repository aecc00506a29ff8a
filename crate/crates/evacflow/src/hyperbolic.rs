//! Density evolution by a monotone finite-volume scheme.
//!
//! The pedestrian density obeys `∂t ρ + div(ρ v(ρ) w(x)) = 0` on the inside
//! region, with zero boundary datum in the conservation-law sense. The
//! scheme is a first-order unsplit finite-volume update with local
//! Lax–Friedrichs (Rusanov) fluxes:
//!
//! - interior faces see the two neighbor states with face speed
//!   `s = ½(w_L + w_R)·ν`;
//! - wall faces carry exactly zero flux (the analytic field is tangent to
//!   walls; forcing zero makes impermeability testable to round-off);
//! - exit faces see a ghost state `ρ = 0` with the inside cell's `w·ν`,
//!   which realizes the relaxed boundary condition and permits outflow.
//!
//! Monotonicity plus the CFL bound keep `ρ ∈ [0, R_max]` and select the
//! entropy solution in the vanishing-mesh limit.

use crate::field::RoutingField;
use crate::fields::ScalarField;
use crate::geometry::{Direction, FaceClass, Grid};
use crate::util::Kahan;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HyperbolicError {
    #[error("density {rho} outside [0, {r_max}]")]
    DomainError { rho: f64, r_max: f64 },
    #[error("invalid speed law: {what}")]
    BadSpeedLaw { what: String },
    #[error("CFL number must lie in (0, 1), got {cfl}")]
    BadCfl { cfl: f64 },
    #[error("degenerate routing field: the wave speed bound is zero")]
    DegenerateField,
    #[error(
        "density {rho} escaped [0, {r_max}] at cell ({i}, {j}) after a step (CFL or scheme bug)"
    )]
    RangeViolation {
        i: usize,
        j: usize,
        rho: f64,
        r_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum LawKind {
    /// v(ρ) = V_max (1 − ρ/R_max).
    Linear,
    /// Piecewise-linear interpolation of a tabulated weakly decreasing v.
    Custom { rho: Vec<f64>, v: Vec<f64> },
}

/// Speed law v and its flux q(ρ) = ρ·v(ρ).
///
/// v must be weakly decreasing with v(0) = V_max and v(R_max) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedLaw {
    kind: LawKind,
    r_max: f64,
    v_max: f64,
}

impl SpeedLaw {
    pub fn linear(r_max: f64, v_max: f64) -> Result<Self, HyperbolicError> {
        if !(r_max > 0.0) || !(v_max > 0.0) {
            return Err(HyperbolicError::BadSpeedLaw {
                what: format!("R_max and V_max must be positive, got {r_max}, {v_max}"),
            });
        }
        Ok(Self {
            kind: LawKind::Linear,
            r_max,
            v_max,
        })
    }

    /// Builds a tabulated law from `(ρ, v)` pairs. The table must start at
    /// ρ = 0, end at ρ = R_max with v = 0, have strictly increasing ρ and
    /// weakly decreasing v.
    pub fn custom(table: &[(f64, f64)]) -> Result<Self, HyperbolicError> {
        let bad = |what: String| Err(HyperbolicError::BadSpeedLaw { what });
        if table.len() < 2 {
            return bad("speed table needs at least two entries".into());
        }
        if table[0].0 != 0.0 {
            return bad(format!(
                "speed table must start at rho = 0, got {}",
                table[0].0
            ));
        }
        let (r_max, v_last) = *table.last().unwrap();
        if !(r_max > 0.0) {
            return bad(format!(
                "speed table must end at a positive R_max, got {r_max}"
            ));
        }
        if v_last != 0.0 {
            return bad(format!("v(R_max) must be 0, got {v_last}"));
        }
        let v_max = table[0].1;
        if !(v_max > 0.0) {
            return bad(format!("v(0) must be positive, got {v_max}"));
        }
        for w in table.windows(2) {
            if !(w[1].0 > w[0].0) {
                return bad("speed table densities must be strictly increasing".into());
            }
            if w[1].1 > w[0].1 {
                return bad("speed values must be weakly decreasing".into());
            }
            if w[1].1 < 0.0 {
                return bad("speed values must be nonnegative".into());
            }
        }
        Ok(Self {
            kind: LawKind::Custom {
                rho: table.iter().map(|t| t.0).collect(),
                v: table.iter().map(|t| t.1).collect(),
            },
            r_max,
            v_max,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// v(ρ) without range checking (callers inside the scheme maintain the
    /// range invariant).
    pub fn v(&self, rho: f64) -> f64 {
        match &self.kind {
            LawKind::Linear => self.v_max * (1.0 - rho / self.r_max),
            LawKind::Custom { rho: xs, v: vs } => {
                // Binary search for the containing segment.
                let k = match xs.binary_search_by(|x| x.partial_cmp(&rho).unwrap()) {
                    Ok(k) => return vs[k],
                    Err(k) => k.clamp(1, xs.len() - 1),
                };
                let t = (rho - xs[k - 1]) / (xs[k] - xs[k - 1]);
                vs[k - 1] + t * (vs[k] - vs[k - 1])
            }
        }
    }

    fn q(&self, rho: f64) -> f64 {
        rho * self.v(rho)
    }

    /// Flux q(ρ) = ρ·v(ρ) with the domain check.
    pub fn flux_q(&self, rho: f64) -> Result<f64, HyperbolicError> {
        if !(0.0..=self.r_max).contains(&rho) {
            return Err(HyperbolicError::DomainError {
                rho,
                r_max: self.r_max,
            });
        }
        Ok(self.q(rho))
    }

    /// max |q'| over `[lo, hi] ⊆ [0, R_max]`.
    ///
    /// For the linear law q' is affine, so endpoint evaluation is exact;
    /// for tabulated laws q' is affine per table segment and the interior
    /// breakpoints join the candidates.
    pub fn max_abs_q_prime(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        match &self.kind {
            LawKind::Linear => {
                let qp = |r: f64| self.v_max * (1.0 - 2.0 * r / self.r_max);
                qp(lo).abs().max(qp(hi).abs())
            }
            LawKind::Custom { rho: xs, v: vs } => {
                // On segment [x_{k-1}, x_k]: v is affine with slope m, so
                // q'(r) = v(r) + r·m is affine too; evaluating it at the
                // ends of every segment overlapping the bracket is exact.
                let mut worst: f64 = 0.0;
                for k in 1..xs.len() {
                    let a = xs[k - 1].max(lo);
                    let b = xs[k].min(hi);
                    if a > b {
                        continue;
                    }
                    let m = (vs[k] - vs[k - 1]) / (xs[k] - xs[k - 1]);
                    for r in [a, b] {
                        let vr = vs[k - 1] + (r - xs[k - 1]) * m;
                        worst = worst.max((vr + r * m).abs());
                    }
                }
                worst
            }
        }
    }
}

/// Local Lax–Friedrichs (Rusanov) flux through a face with speed `s = w·ν`:
/// `½·s·(q(ρ_L)+q(ρ_R)) − ½·α·(ρ_R−ρ_L)` with `α = |s|·max|q'|` over the
/// state bracket. Consistent: equal states return `s·q(ρ)`.
pub fn numerical_face_flux(rho_l: f64, rho_r: f64, s: f64, law: &SpeedLaw) -> f64 {
    let alpha = s.abs() * law.max_abs_q_prime(rho_l.min(rho_r), rho_l.max(rho_r));
    0.5 * s * (law.q(rho_l) + law.q(rho_r)) - 0.5 * alpha * (rho_r - rho_l)
}

/// Density snapshot at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: ScalarField,
    pub t: f64,
}

impl DensityState {
    pub fn uniform(grid: &Grid, value: f64) -> Self {
        Self {
            rho: ScalarField::constant(grid, value),
            t: 0.0,
        }
    }

    /// Total mass ∫ρ, compensated summation.
    pub fn mass(&self, grid: &Grid) -> f64 {
        let cell = grid.hx() * grid.hy();
        let mut acc = Kahan::new();
        for &r in self.rho.values() {
            acc.add(r * cell);
        }
        acc.value()
    }
}

/// CFL-limited time step `cfl·min(hx,hy) / (2·L_q)` with
/// `L_q = max|q'|·max‖w‖`, clamped to the remaining time.
pub fn cfl_timestep(
    field: &RoutingField,
    law: &SpeedLaw,
    grid: &Grid,
    cfl: f64,
    t_remaining: f64,
) -> Result<f64, HyperbolicError> {
    if !(cfl > 0.0 && cfl < 1.0) {
        return Err(HyperbolicError::BadCfl { cfl });
    }
    let l_q = law.max_abs_q_prime(0.0, law.r_max) * field.w.max_norm();
    if l_q == 0.0 {
        return Err(HyperbolicError::DegenerateField);
    }
    let dt = cfl * grid.hx().min(grid.hy()) / (2.0 * l_q);
    Ok(dt.min(t_remaining))
}

/// One explicit update; returns the new state and the mass that left
/// through exit faces during the step.
pub struct StepOutcome {
    pub state: DensityState,
    pub exit_outflow: f64,
}

/// Advances the density by `dt` (which must satisfy the CFL bound).
/// `seal_exits` replaces the exit flux by zero, turning the domain into a
/// closed box; used by conservation audits.
pub fn step_with(
    state: &DensityState,
    field: &RoutingField,
    law: &SpeedLaw,
    dt: f64,
    grid: &Grid,
    seal_exits: bool,
) -> Result<StepOutcome, HyperbolicError> {
    let rho = state.rho.values();
    let w = field.w.values();
    let mut next = rho.to_vec();
    let mut outflow = Kahan::new();

    let rx = dt / grid.hx();
    let ry = dt / grid.hy();

    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        // Each interior face is visited once, from its left/lower cell.
        for dir in [Direction::Right, Direction::Up] {
            if grid.face_class_ord(ord, dir) != FaceClass::Interior {
                continue;
            }
            let (ni, nj) = grid.neighbor(i, j, dir).unwrap();
            let nord = grid.ordinal(ni, nj).unwrap();
            let nu = dir.normal();
            let s = 0.5 * ((w[ord][0] + w[nord][0]) * nu[0] + (w[ord][1] + w[nord][1]) * nu[1]);
            let f = numerical_face_flux(rho[ord], rho[nord], s, law);
            let r = if dir.is_x_normal() { rx } else { ry };
            next[ord] -= r * f;
            next[nord] += r * f;
        }
        // Boundary faces belong to exactly one inside cell.
        for dir in Direction::ALL {
            match grid.face_class_ord(ord, dir) {
                FaceClass::Interior | FaceClass::Wall => {}
                FaceClass::Exit => {
                    if seal_exits {
                        continue;
                    }
                    let nu = dir.normal();
                    let s = w[ord][0] * nu[0] + w[ord][1] * nu[1];
                    let f = numerical_face_flux(rho[ord], 0.0, s, law);
                    let r = if dir.is_x_normal() { rx } else { ry };
                    next[ord] -= r * f;
                    outflow.add(f * grid.face_length(dir) * dt);
                }
            }
        }
    }

    // The monotone update cannot leave [0, R_max]; escaping it (beyond a
    // round-off allowance) indicates a CFL violation or a flux bug.
    let guard = 1e-12 * law.r_max;
    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        if next[ord] < -guard || next[ord] > law.r_max + guard {
            return Err(HyperbolicError::RangeViolation {
                i,
                j,
                rho: next[ord],
                r_max: law.r_max,
            });
        }
    }

    Ok(StepOutcome {
        state: DensityState {
            rho: ScalarField::from_vec(grid, next),
            t: state.t + dt,
        },
        exit_outflow: outflow.value(),
    })
}

/// [`step_with`] without exit sealing.
pub fn step(
    state: &DensityState,
    field: &RoutingField,
    law: &SpeedLaw,
    dt: f64,
    grid: &Grid,
) -> Result<StepOutcome, HyperbolicError> {
    step_with(state, field, law, dt, grid, false)
}

/// Σ over interior faces of |ρ_L − ρ_R| times the face length.
pub fn discrete_tv(rho: &ScalarField, grid: &Grid) -> f64 {
    let values = rho.values();
    let mut acc = Kahan::new();
    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        for dir in [Direction::Right, Direction::Up] {
            if grid.face_class_ord(ord, dir) != FaceClass::Interior {
                continue;
            }
            let (ni, nj) = grid.neighbor(i, j, dir).unwrap();
            let nord = grid.ordinal(ni, nj).unwrap();
            acc.add((values[ord] - values[nord]).abs() * grid.face_length(dir));
        }
    }
    acc.value()
}

/// One sampled row of an evolution report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    pub mass: f64,
    /// Cumulative mass that left through exits since the start of the run.
    pub outflow: f64,
    pub tv: f64,
    pub rho_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvacuationTime {
    Reached(f64),
    NotReached,
}

#[derive(Debug, Clone)]
pub struct EvolutionReport {
    pub rows: Vec<ReportRow>,
    pub evacuation_time: EvacuationTime,
    pub initial_mass: f64,
    pub steps: usize,
    /// Extremes of ρ over every cell of every step of the run.
    pub global_min_rho: f64,
    pub global_max_rho: f64,
}

#[derive(Debug, Clone)]
pub struct EvolveParams {
    pub t_end: f64,
    pub cfl: f64,
    /// Run stops early once mass ≤ mass_threshold · initial mass.
    pub mass_threshold: f64,
    /// Instants at which a report row (and snapshot callback) is emitted;
    /// they are hit exactly by clamping dt.
    pub output_instants: Vec<f64>,
    pub seal_exits: bool,
}

impl EvolveParams {
    pub fn to_time(t_end: f64, cfl: f64) -> Self {
        Self {
            t_end,
            cfl,
            mass_threshold: 1e-3,
            output_instants: Vec::new(),
            seal_exits: false,
        }
    }
}

/// Runs CFL-limited steps from `rho0.t` to `t_end`, reporting at output
/// instants and stopping early once the mass threshold is crossed.
///
/// `observer` is called with each report row and the state it describes
/// (the initial state included). Identical inputs produce bit-identical
/// trajectories: the loop is sequential and every reduction has a fixed
/// order.
pub fn evolve_with<F>(
    rho0: DensityState,
    field: &RoutingField,
    law: &SpeedLaw,
    grid: &Grid,
    params: &EvolveParams,
    mut observer: F,
) -> Result<(DensityState, EvolutionReport), HyperbolicError>
where
    F: FnMut(&DensityState, &ReportRow),
{
    for &r in rho0.rho.values() {
        if !(0.0..=law.r_max).contains(&r) {
            return Err(HyperbolicError::DomainError {
                rho: r,
                r_max: law.r_max,
            });
        }
    }

    let mut instants: Vec<f64> = params
        .output_instants
        .iter()
        .copied()
        .filter(|&t| t > rho0.t && t <= params.t_end)
        .collect();
    instants.sort_by(|a, b| a.partial_cmp(b).unwrap());
    instants.dedup();
    if instants.last() != Some(&params.t_end) {
        instants.push(params.t_end);
    }

    let initial_mass = rho0.mass(grid);
    let threshold = params.mass_threshold * initial_mass;

    let mut state = rho0;
    let mut cum_outflow = Kahan::new();
    let mut steps = 0usize;
    let mut global_min = state.rho.min();
    let mut global_max = state.rho.max();
    let mut evac = if initial_mass <= threshold {
        EvacuationTime::Reached(state.t)
    } else {
        EvacuationTime::NotReached
    };

    let mut rows = Vec::new();
    let make_row = |state: &DensityState, outflow: f64, grid: &Grid| ReportRow {
        t: state.t,
        mass: state.mass(grid),
        outflow,
        tv: discrete_tv(&state.rho, grid),
        rho_max: state.rho.max(),
    };
    let row0 = make_row(&state, 0.0, grid);
    observer(&state, &row0);
    rows.push(row0);

    if matches!(evac, EvacuationTime::Reached(_)) {
        return Ok((
            state,
            EvolutionReport {
                rows,
                evacuation_time: evac,
                initial_mass,
                steps: 0,
                global_min_rho: global_min,
                global_max_rho: global_max,
            },
        ));
    }

    'outer: for &target in &instants {
        while state.t < target {
            let dt = cfl_timestep(field, law, grid, params.cfl, target - state.t)?;
            let out = step_with(&state, field, law, dt, grid, params.seal_exits)?;
            state = out.state;
            cum_outflow.add(out.exit_outflow);
            steps += 1;
            global_min = global_min.min(state.rho.min());
            global_max = global_max.max(state.rho.max());
            // Land exactly on the instant so restarted runs share the
            // same dt schedule bit for bit.
            if (target - state.t).abs() < 1e-12 * target.abs().max(1.0) {
                state.t = target;
            }
            if matches!(evac, EvacuationTime::NotReached) && state.mass(grid) <= threshold {
                evac = EvacuationTime::Reached(state.t);
                let row = make_row(&state, cum_outflow.value(), grid);
                observer(&state, &row);
                rows.push(row);
                break 'outer;
            }
        }
        let row = make_row(&state, cum_outflow.value(), grid);
        observer(&state, &row);
        rows.push(row);
    }

    Ok((
        state,
        EvolutionReport {
            rows,
            evacuation_time: evac,
            initial_mass,
            steps,
            global_min_rho: global_min,
            global_max_rho: global_max,
        },
    ))
}

/// [`evolve_with`] without an observer.
pub fn evolve(
    rho0: DensityState,
    field: &RoutingField,
    law: &SpeedLaw,
    grid: &Grid,
    params: &EvolveParams,
) -> Result<(DensityState, EvolutionReport), HyperbolicError> {
    evolve_with(rho0, field, law, grid, params, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::VectorField;
    use crate::geometry::build_grid;

    fn unit_law() -> SpeedLaw {
        SpeedLaw::linear(1.0, 1.0).unwrap()
    }

    #[test]
    fn linear_flux_values() {
        let law = unit_law();
        assert_eq!(law.flux_q(0.0).unwrap(), 0.0);
        assert!((law.flux_q(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(law.flux_q(1.0).unwrap(), 0.0);
        assert!(law.flux_q(1.5).is_err());
        assert!(law.flux_q(-0.1).is_err());
    }

    #[test]
    fn custom_law_validation_and_eval() {
        let law = SpeedLaw::custom(&[(0.0, 2.0), (0.5, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(law.v_max(), 2.0);
        assert_eq!(law.r_max(), 1.0);
        assert!((law.v(0.25) - 1.5).abs() < 1e-15);
        assert!((law.flux_q(0.75).unwrap() - 0.75 * 0.5).abs() < 1e-15);

        assert!(SpeedLaw::custom(&[(0.0, 1.0), (1.0, 0.1)]).is_err()); // v(R_max) != 0
        assert!(SpeedLaw::custom(&[(0.1, 1.0), (1.0, 0.0)]).is_err()); // starts late
        assert!(SpeedLaw::custom(&[(0.0, 1.0), (0.5, 1.2), (1.0, 0.0)]).is_err());
        // increasing
    }

    #[test]
    fn rusanov_consistency_and_hand_value() {
        let law = unit_law();
        // Equal states: s·q(ρ).
        let f = numerical_face_flux(0.3, 0.3, 1.0, &law);
        assert!((f - 0.21).abs() < 1e-15);
        // Exit ghost example: α = 0.9, flux = 0.072 + 0.36.
        let f = numerical_face_flux(0.8, 0.0, 0.9, &law);
        assert!((f - 0.432).abs() < 1e-15);
        // Zero face speed, any jump: zero flux.
        assert_eq!(numerical_face_flux(0.9, 0.1, 0.0, &law), 0.0);
    }

    #[test]
    fn cfl_examples() {
        let mask = ".E";
        let g = build_grid(mask, 0.01, 0.01).unwrap();
        let field = RoutingField::from_parts(VectorField::constant(&g, [1.0, 0.0]), 0.1);
        let law = unit_law();
        let dt = cfl_timestep(&field, &law, &g, 0.4, f64::INFINITY).unwrap();
        assert!((dt - 0.002).abs() < 1e-15);

        // Doubling the resolution halves dt.
        let g2 = build_grid(mask, 0.005, 0.005).unwrap();
        let f2 = RoutingField::from_parts(VectorField::constant(&g2, [1.0, 0.0]), 0.1);
        let dt2 = cfl_timestep(&f2, &law, &g2, 0.4, f64::INFINITY).unwrap();
        assert!((dt2 - dt / 2.0).abs() < 1e-15);

        assert!(matches!(
            cfl_timestep(&field, &law, &g, 0.0, 1.0),
            Err(HyperbolicError::BadCfl { .. })
        ));
        let zero_field = RoutingField::from_parts(VectorField::constant(&g, [0.0, 0.0]), 0.1);
        assert!(matches!(
            cfl_timestep(&zero_field, &law, &g, 0.4, 1.0),
            Err(HyperbolicError::DegenerateField)
        ));
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let g = build_grid("E..\n#..\n#..", 0.1, 0.1).unwrap();
        let field = RoutingField::from_parts(VectorField::constant(&g, [-0.7, 0.2]), 0.1);
        let law = unit_law();
        let state = DensityState::uniform(&g, 0.0);
        let out = step(&state, &field, &law, 0.01, &g).unwrap();
        assert!(out.state.rho.values().iter().all(|&r| r == 0.0));
        assert_eq!(out.exit_outflow, 0.0);
    }

    #[test]
    fn single_cell_step_by_hand() {
        // ρ' = 0.8 − 0.1·0.432 with the exit flux example above.
        let g = build_grid("E.#", 1.0, 1.0).unwrap();
        let field = RoutingField::from_parts(VectorField::constant(&g, [-0.9, 0.0]), 0.1);
        let law = unit_law();
        let state = DensityState::uniform(&g, 0.8);
        let out = step(&state, &field, &law, 0.1, &g).unwrap();
        assert!((out.state.rho.get(0) - 0.7568).abs() < 1e-15);
        assert!((out.exit_outflow - 0.0432).abs() < 1e-15);
    }

    #[test]
    fn step_mass_identity() {
        // Mass change equals the exit outflow, to round-off.
        let g = build_grid("E...\n#...\n#...", 0.25, 0.25).unwrap();
        let mut w = Vec::new();
        for &(i, j) in g.inside_cells() {
            w.push([-(0.3 + 0.1 * i as f64), 0.05 * (j as f64 - 1.0)]);
        }
        let field = RoutingField::from_parts(VectorField::from_vec(&g, w), 0.1);
        let law = unit_law();
        let mut rho = Vec::new();
        for k in 0..g.inside_count() {
            rho.push(0.2 + 0.05 * ((k * 7 % 11) as f64 / 11.0));
        }
        let state = DensityState {
            rho: ScalarField::from_vec(&g, rho),
            t: 0.0,
        };
        let dt = 0.05;
        let before = state.mass(&g);
        let out = step(&state, &field, &law, dt, &g).unwrap();
        let after = out.state.mass(&g);
        assert!((before - after - out.exit_outflow).abs() < 1e-14 * before);
    }

    #[test]
    fn tv_examples() {
        let g = build_grid("E...\n#...\n#...", 1.0, 1.0).unwrap();
        assert_eq!(discrete_tv(&ScalarField::constant(&g, 0.7), &g), 0.0);

        // 1D two-level step: a single 0.6 jump across one face of length h.
        let g1 = build_grid("E...", 0.25, 0.25).unwrap();
        let rho =
            ScalarField::from_vec(&g1, vec![0.8, 0.8, 0.2, 0.2][..g1.inside_count()].to_vec());
        assert!((discrete_tv(&rho, &g1) - 0.6 * 0.25).abs() < 1e-15);

        // Checkerboard on n×n cells with h = 1/n: TV = 2(n−1).
        let n = 8;
        let g3 = {
            let mut m = String::new();
            for r in 0..n {
                m.push_str(&".".repeat(n));
                m.push(if r == 0 { 'E' } else { '#' });
                m.push('\n');
            }
            build_grid(&m, 1.0 / n as f64, 1.0 / n as f64).unwrap()
        };
        let mut vals3 = vec![0.0; g3.inside_count()];
        for (ord, &(i, j)) in g3.inside_cells().iter().enumerate() {
            vals3[ord] = ((i + j) % 2) as f64;
        }
        let tv = discrete_tv(&ScalarField::from_vec(&g3, vals3), &g3);
        assert!((tv - 2.0 * (n as f64 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn evolve_zero_density_evacuates_immediately() {
        let g = build_grid("E...", 0.25, 0.25).unwrap();
        let field = RoutingField::from_parts(VectorField::constant(&g, [-0.9, 0.0]), 0.1);
        let law = unit_law();
        let (state, report) = evolve(
            DensityState::uniform(&g, 0.0),
            &field,
            &law,
            &g,
            &EvolveParams::to_time(0.5, 0.4),
        )
        .unwrap();
        assert_eq!(report.evacuation_time, EvacuationTime::Reached(0.0));
        assert_eq!(state.t, 0.0);
    }

    #[test]
    fn evolve_mass_is_strictly_decreasing() {
        let mut mask = String::new();
        for _ in 0..8 {
            mask.push_str(&".".repeat(16));
            mask.push('E');
            mask.push('\n');
        }
        let g = build_grid(&mask, 1.0 / 16.0, 0.5 / 8.0).unwrap();
        let sol = crate::elliptic::solve_u(&g, &crate::elliptic::EllipticParams::new(0.5)).unwrap();
        let field = crate::field::build_routing_field(&sol, 0.1, &g);
        let law = unit_law();
        let mut params = EvolveParams::to_time(0.5, 0.4);
        params.output_instants = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let (_, report) =
            evolve(DensityState::uniform(&g, 0.5), &field, &law, &g, &params).unwrap();
        for w in report.rows.windows(2) {
            assert!(w[1].mass < w[0].mass, "mass should decrease: {w:?}");
        }
        assert!(report.global_min_rho >= 0.0);
        assert!(report.global_max_rho <= 1.0);
    }

    #[test]
    fn semigroup_restart_is_bit_identical() {
        let mut mask = String::new();
        for _ in 0..6 {
            mask.push_str(&".".repeat(12));
            mask.push('E');
            mask.push('\n');
        }
        let g = build_grid(&mask, 1.0 / 12.0, 0.5 / 6.0).unwrap();
        let sol = crate::elliptic::solve_u(&g, &crate::elliptic::EllipticParams::new(0.5)).unwrap();
        let field = crate::field::build_routing_field(&sol, 0.1, &g);
        let law = unit_law();
        let rho0 = DensityState::uniform(&g, 0.4);

        let mut p_full = EvolveParams::to_time(0.2, 0.4);
        p_full.output_instants = vec![0.1, 0.2];
        let (end_full, _) = evolve(rho0.clone(), &field, &law, &g, &p_full).unwrap();

        let p_half1 = EvolveParams::to_time(0.1, 0.4);
        let (mid, _) = evolve(rho0, &field, &law, &g, &p_half1).unwrap();
        let p_half2 = EvolveParams::to_time(0.2, 0.4);
        let (end_split, _) = evolve(mid, &field, &law, &g, &p_half2).unwrap();

        assert_eq!(end_full.rho.values(), end_split.rho.values());
        assert_eq!(end_full.t, end_split.t);
    }

    #[test]
    fn custom_law_evolution_conserves_and_stays_in_range() {
        let mut mask = String::new();
        for _ in 0..6 {
            mask.push_str(&".".repeat(12));
            mask.push('E');
            mask.push('\n');
        }
        let g = build_grid(&mask, 1.0 / 12.0, 0.5 / 6.0).unwrap();
        let sol = crate::elliptic::solve_u(&g, &crate::elliptic::EllipticParams::new(0.5)).unwrap();
        let field = crate::field::build_routing_field(&sol, 0.1, &g);
        let law = SpeedLaw::custom(&[(0.0, 1.2), (0.3, 1.2), (0.8, 0.4), (1.0, 0.0)]).unwrap();
        let mut params = EvolveParams::to_time(0.5, 0.4);
        params.output_instants = vec![0.25, 0.5];
        params.mass_threshold = 1e-12;
        let (_, report) =
            evolve(DensityState::uniform(&g, 0.7), &field, &law, &g, &params).unwrap();
        assert!(report.global_min_rho >= 0.0);
        assert!(report.global_max_rho <= 1.0);
        let m0 = report.initial_mass;
        for row in &report.rows {
            assert!((row.mass + row.outflow - m0).abs() <= 1e-12 * m0);
        }
    }

    #[test]
    fn rejects_out_of_range_initial_data() {
        let g = build_grid("E...", 0.25, 0.25).unwrap();
        let field = RoutingField::from_parts(VectorField::constant(&g, [-0.9, 0.0]), 0.1);
        let law = unit_law();
        let state = DensityState {
            rho: ScalarField::from_vec(&g, vec![0.2, 1.5, 0.2, 0.2][..g.inside_count()].to_vec()),
            t: 0.0,
        };
        assert!(matches!(
            evolve(state, &field, &law, &g, &EvolveParams::to_time(0.1, 0.4)),
            Err(HyperbolicError::DomainError { .. })
        ));
    }
}
