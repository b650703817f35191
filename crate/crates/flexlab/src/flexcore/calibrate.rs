use super::glue::{glue, radial_grid, verify_relation, GluedFamily, MarginReport, RadialCutoff};
use super::{FlexError, GlueProblem};
use crate::multijet::MultiJet;
use serde::Serialize;

/// Candidate cutoff parameters, tried with `ε` in the outer loop and `δ` in the inner loop.
#[derive(Clone, Debug, Serialize)]
pub struct Schedule {
    pub deltas: Vec<f64>,
    pub eps: Vec<f64>,
}

impl Schedule {
    pub fn geometric(delta0: f64, delta_ratio: f64, n_delta: usize, eps0: f64, eps_ratio: f64, n_eps: usize) -> Self {
        Schedule {
            deltas: (0..n_delta).map(|i| delta0 * delta_ratio.powi(i as i32)).collect(),
            eps: (0..n_eps).map(|i| eps0 * eps_ratio.powi(i as i32)).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSpec {
    /// x-samples, shared between the cutoff centers.
    pub x_samples: usize,
    pub t_samples: usize,
    /// Double the grid after a certification until two successive grids agree on the margin sign.
    pub refine: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x_samples: 2048, t_samples: 64, refine: false }
    }
}

impl GridSpec {
    pub fn t_grid(&self) -> Vec<f64> {
        let n = self.t_samples.max(2);
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub delta: f64,
    pub eps: f64,
    pub min_margin: f64,
    pub argmin_t: f64,
    pub argmin_x: Vec<f64>,
    pub grid_x: usize,
    pub grid_t: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    /// No candidate certified the relation on its grid.
    ScheduleExhausted,
    /// `V₀` accumulates at a point outside itself and the jets of `F(1)` along it do not converge there.
    NonClosedV0 {
        limit_point: Vec<f64>,
        head_quotient: f64,
        tail_quotient: f64,
    },
    /// A candidate certified, but `F(t)` moves the frozen jet on `V₀`.
    FrozenJetMismatch,
    Invalid {
        message: String,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct FreezeViolation {
    pub point: Vec<f64>,
    pub t: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationFailure {
    pub reason: FailureReason,
    pub trace: Vec<TraceEntry>,
    pub best: Option<TraceEntry>,
    pub freeze_violations: Vec<FreezeViolation>,
    pub precondition_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationOutcome {
    pub delta: f64,
    pub eps: f64,
    pub radii: Vec<f64>,
    pub report: MarginReport,
    pub trace: Vec<TraceEntry>,
    pub precondition_margin: f64,
    #[serde(skip)]
    pub cutoff: RadialCutoff,
}

impl CalibrationOutcome {
    pub fn glued<'a>(&'a self, problem: &GlueProblem<'a>) -> GluedFamily<'a> {
        glue(problem.f0, problem.family, &self.cutoff, problem.k).expect("calibrated cutoff lies inside U")
    }
}

const FREEZE_TOL: f64 = 1e-9;

fn freeze_violations(problem: &GlueProblem, t_grid: &[f64]) -> Vec<FreezeViolation> {
    let mut out = Vec::new();
    if problem.k == 0 {
        return out;
    }
    let order = problem.k - 1;
    for p in &problem.v0.points {
        let base = problem.f0.eval(p, order);
        let scale = base.iter().flat_map(|j| j.coeffs().iter()).fold(1.0f64, |m, c| m.max(c.abs()));
        for &t in t_grid {
            let jets = problem.family.eval(t, p, order);
            let dev = jets
                .iter()
                .zip(&base)
                .map(|(a, b)| {
                    let a = a.drop_first_var();
                    a.coeffs().iter().zip(b.coeffs()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
                })
                .fold(0.0, f64::max);
            if !(dev <= FREEZE_TOL * scale) {
                out.push(FreezeViolation { point: p.clone(), t, deviation: dev });
                break;
            }
        }
    }
    out
}

fn jet_distance(a: &[MultiJet], b: &[MultiJet]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(a, b)| a.coeffs().iter().zip(b.coeffs()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
        .fold(0.0, f64::max)
}

/// Along the samples approaching each limit point, the `k`-jet of `F(1)` must stay Lipschitz:
/// a jump-to-distance quotient that grows by more than 16× from the first third of the
/// sequence to the last means the jets have no limit there.
fn limit_point_check(problem: &GlueProblem) -> Option<FailureReason> {
    for q in &problem.v0.limit_points {
        let mut pts: Vec<&Vec<f64>> = problem.v0.points.iter().collect();
        let d = |p: &Vec<f64>| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        pts.sort_by(|a, b| d(b).total_cmp(&d(a)));
        if pts.len() < 6 {
            continue;
        }
        let jets: Vec<Vec<MultiJet>> = pts
            .iter()
            .map(|p| problem.family.eval(1.0, p, problem.k).iter().map(|j| j.drop_first_var()).collect())
            .collect();
        let quotients: Vec<f64> = jets
            .windows(2)
            .zip(pts.windows(2))
            .map(|(j, p)| {
                let gap = p[0].iter().zip(p[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                jet_distance(&j[0], &j[1]) / gap
            })
            .collect();
        let third = quotients.len() / 3;
        let head = quotients[..third].iter().cloned().fold(0.0, f64::max);
        let tail = quotients[quotients.len() - third..].iter().cloned().fold(0.0, f64::max);
        if !(tail <= 16.0 * head.max(1e-12)) {
            return Some(FailureReason::NonClosedV0 {
                limit_point: q.clone(),
                head_quotient: head,
                tail_quotient: tail,
            });
        }
    }
    None
}

fn radii_for(problem: &GlueProblem, eps: f64) -> Vec<f64> {
    let dom = problem.family.domain();
    problem.v0.points.iter().map(|p| eps.min(0.9 * dom.boundary_distance(p))).collect()
}

fn x_grid(centers: &[Vec<f64>], radii: &[f64], delta: f64, samples: usize) -> Result<Vec<Vec<f64>>, FlexError> {
    let mut out = Vec::new();
    let per_center = (samples / centers.len().max(1)).max(64);
    for (c, &r) in centers.iter().zip(radii) {
        out.extend(radial_grid(c, r, delta, per_center)?);
    }
    out.extend(centers.iter().cloned());
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    Ok(out)
}

fn precondition_margin(problem: &GlueProblem, xs: &[Vec<f64>], t_grid: &[f64]) -> f64 {
    let dom = problem.family.domain();
    let order = problem.relation.order();
    let mut m = f64::INFINITY;
    for x in xs.iter().filter(|x| dom.contains(x)) {
        for jets in problem.family.eval_many(t_grid, x, order) {
            let j: Vec<MultiJet> = jets.iter().map(|j| j.drop_first_var()).collect();
            let v = problem.relation.margin(x, &j);
            m = m.min(if v.is_nan() { f64::NEG_INFINITY } else { v });
        }
    }
    m
}

fn evaluate(
    problem: &GlueProblem,
    cutoff: &RadialCutoff,
    grid: &GridSpec,
    x_samples: usize,
    t_samples: usize,
) -> Result<MarginReport, FlexError> {
    let g = glue(problem.f0, problem.family, cutoff, problem.k)?;
    let xs = x_grid(cutoff.centers(), &cutoff.radii(), cutoff.delta(), x_samples)?;
    let ts = GridSpec { x_samples, t_samples, refine: grid.refine }.t_grid();
    Ok(verify_relation(&g, problem.relation, &ts, &xs))
}

/// Searches the schedule for cutoff parameters whose glued family satisfies the relation on the grid.
pub fn calibrate(
    problem: &GlueProblem,
    schedule: &Schedule,
    grid: &GridSpec,
) -> Result<CalibrationOutcome, CalibrationFailure> {
    let t_grid = grid.t_grid();
    let violations = freeze_violations(problem, &t_grid);
    let limit = limit_point_check(problem);
    let mut trace = Vec::new();
    let mut pre = f64::INFINITY;
    let fail = |reason, trace: Vec<TraceEntry>, violations, pre| {
        let best = trace.iter().cloned().max_by(|a: &TraceEntry, b: &TraceEntry| a.min_margin.total_cmp(&b.min_margin));
        CalibrationFailure { reason, trace, best, freeze_violations: violations, precondition_margin: pre }
    };
    if problem.v0.points.is_empty() {
        let reason = FailureReason::Invalid { message: "V₀ has no points".into() };
        return Err(fail(reason, trace, violations, pre));
    }
    for &eps in &schedule.eps {
        let radii = radii_for(problem, eps);
        for &delta in &schedule.deltas {
            let cutoff = match RadialCutoff::new(problem.v0.points.clone(), &radii, delta) {
                Ok(c) => c,
                Err(e) => return Err(fail(FailureReason::Invalid { message: e.to_string() }, trace, violations, pre)),
            };
            if pre == f64::INFINITY {
                match x_grid(cutoff.centers(), &radii, delta, grid.x_samples) {
                    Ok(xs) => pre = precondition_margin(problem, &xs, &t_grid),
                    Err(e) => {
                        return Err(fail(FailureReason::Invalid { message: e.to_string() }, trace, violations, pre))
                    }
                }
            }
            let (mut nx, mut nt) = (grid.x_samples, grid.t_samples);
            let mut report = match evaluate(problem, &cutoff, grid, nx, nt) {
                Ok(r) => r,
                Err(e) => return Err(fail(FailureReason::Invalid { message: e.to_string() }, trace, violations, pre)),
            };
            if grid.refine && report.certified {
                for _ in 0..4 {
                    nx *= 2;
                    nt *= 2;
                    let finer = evaluate(problem, &cutoff, grid, nx, nt).expect("grid already validated");
                    let agree = finer.certified == report.certified;
                    report = finer;
                    if agree {
                        break;
                    }
                }
            }
            report.delta = Some(delta);
            report.eps = Some(eps);
            trace.push(TraceEntry {
                delta,
                eps,
                min_margin: report.min_margin,
                argmin_t: report.argmin_t,
                argmin_x: report.argmin_x.clone(),
                grid_x: report.grid_x,
                grid_t: report.grid_t,
            });
            if report.certified {
                if let Some(reason) = limit {
                    return Err(fail(reason, trace, violations, pre));
                }
                if !violations.is_empty() {
                    return Err(fail(FailureReason::FrozenJetMismatch, trace, violations, pre));
                }
                return Ok(CalibrationOutcome { delta, eps, radii, report, trace, precondition_margin: pre, cutoff });
            }
        }
    }
    Err(fail(limit.unwrap_or(FailureReason::ScheduleExhausted), trace, violations, pre))
}
