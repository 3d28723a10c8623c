//! Mixed-integer encoding of the scheduling problem and its export in LP
//! text format for off-the-shelf solvers.
//!
//! Variables, for every satellite `s` and observation `o`:
//! - `x_s_o` (binary): `o` is performed on `s`; forced to zero when `s` is
//!   not the observation's satellite;
//! - `t_s_o` (continuous in `[window.start, window.end]`): start date;
//! - `b_s_o_p` (binary, `o != p`): order-relaxation variable; when both
//!   observations are scheduled at most one of `b_s_o_p`, `b_s_p_o` may be
//!   set, which leaves at least one big-M separation row active.
//!
//! Separation rows use `M = o.window.end - p.window.start + o.duration +
//! transition(o, p)` and are omitted when that value is non-positive (the
//! windows already force the order). Exclusive-user priority is encoded by
//! adding a boost to exclusive observation rewards; an optional strict mode
//! additionally pins foreign observations to exclusive-free time ranges so
//! that solutions obey the grant rules of the validator.

use std::io::Write;

use crate::error::ModelError;
use crate::model::{Instance, Observation};
use crate::time::{subtract_intervals, TimeWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpBound {
    pub var: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub name: String,
    /// Maximization objective.
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<LpRow>,
    pub bounds: Vec<LpBound>,
    pub binaries: Vec<String>,
    pub n_x: usize,
    pub n_t: usize,
    pub n_beta: usize,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Builds the full model. `priority_boost` must strictly dominate the total
/// non-exclusive reward so the solver always prefers scheduling exclusive
/// observations.
pub fn build_milp(
    p: &Instance,
    priority_boost: f64,
    strict_exclusives: bool,
) -> Result<MilpModel, ModelError> {
    let central_total = p
        .observations()
        .filter(|o| p.user(&o.owner).is_some_and(|u| !u.is_exclusive()))
        .fold(0.0, |acc, o| acc + o.reward);
    if p.observations().next().is_some() && priority_boost <= central_total {
        return Err(ModelError::Inconsistent(format!(
            "priority boost {priority_boost} does not dominate the non-exclusive total {central_total}"
        )));
    }

    let sats: Vec<_> = p.satellites().collect();
    let obs: Vec<&Observation> = p.observations().collect();

    let x = |s: &str, o: &str| format!("x_{}_{}", sanitize(s), sanitize(o));
    let t = |s: &str, o: &str| format!("t_{}_{}", sanitize(s), sanitize(o));
    let beta = |s: &str, o: &str, q: &str| {
        format!("b_{}_{}_{}", sanitize(s), sanitize(o), sanitize(q))
    };

    let mut objective = Vec::new();
    for s in &sats {
        for o in &obs {
            let exclusive = p.user(&o.owner).is_some_and(|u| u.is_exclusive());
            let reward = if exclusive { o.reward + priority_boost } else { o.reward };
            objective.push((x(s.id.as_str(), o.id.as_str()), reward));
        }
    }

    let mut rows = Vec::new();
    for s in &sats {
        for o in &obs {
            for q in &obs {
                if o.id == q.id {
                    continue;
                }
                // When o is scheduled, at most one of the two order
                // variables may be set.
                rows.push(LpRow {
                    name: format!(
                        "link_{}_{}_{}",
                        sanitize(s.id.as_str()),
                        sanitize(o.id.as_str()),
                        sanitize(q.id.as_str())
                    ),
                    terms: vec![
                        (beta(s.id.as_str(), o.id.as_str(), q.id.as_str()), 1.0),
                        (beta(s.id.as_str(), q.id.as_str(), o.id.as_str()), 1.0),
                        (x(s.id.as_str(), o.id.as_str()), 1.0),
                    ],
                    sense: Sense::Le,
                    rhs: 2.0,
                });
            }
        }
    }
    for s in &sats {
        for (i, o) in obs.iter().enumerate() {
            for q in obs.iter().skip(i + 1) {
                rows.push(LpRow {
                    name: format!(
                        "mutex_{}_{}_{}",
                        sanitize(s.id.as_str()),
                        sanitize(o.id.as_str()),
                        sanitize(q.id.as_str())
                    ),
                    terms: vec![
                        (beta(s.id.as_str(), o.id.as_str(), q.id.as_str()), 1.0),
                        (beta(s.id.as_str(), q.id.as_str(), o.id.as_str()), 1.0),
                    ],
                    sense: Sense::Le,
                    rhs: 1.0,
                });
            }
        }
    }
    for s in &sats {
        for o in &obs {
            for q in &obs {
                if o.id == q.id {
                    continue;
                }
                let tau = s.transition.between(&o.id, &q.id);
                let big_m = o.window.end - q.window.start + o.duration + tau;
                if big_m <= 0.0 {
                    continue; // the windows force this order already
                }
                rows.push(LpRow {
                    name: format!(
                        "sep_{}_{}_{}",
                        sanitize(s.id.as_str()),
                        sanitize(o.id.as_str()),
                        sanitize(q.id.as_str())
                    ),
                    terms: vec![
                        (t(s.id.as_str(), q.id.as_str()), 1.0),
                        (t(s.id.as_str(), o.id.as_str()), -1.0),
                        (beta(s.id.as_str(), o.id.as_str(), q.id.as_str()), big_m),
                    ],
                    sense: Sense::Ge,
                    rhs: tau + o.duration,
                });
            }
        }
    }
    for s in &sats {
        rows.push(LpRow {
            name: format!("cap_{}", sanitize(s.id.as_str())),
            terms: obs
                .iter()
                .map(|o| (x(s.id.as_str(), o.id.as_str()), 1.0))
                .collect(),
            sense: Sense::Le,
            rhs: s.capacity as f64,
        });
    }
    for s in &sats {
        for r in p.requests() {
            rows.push(LpRow {
                name: format!("req_{}_{}", sanitize(s.id.as_str()), sanitize(r.id.as_str())),
                terms: r
                    .opportunities
                    .iter()
                    .map(|o| (x(s.id.as_str(), o.as_str()), 1.0))
                    .collect(),
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
    }

    let mut bounds = Vec::new();
    for s in &sats {
        for o in &obs {
            let mut window = o.window;
            let mut force_off = s.id != o.satellite;
            if strict_exclusives && !force_off {
                if let Some(clipped) = strict_window(p, o) {
                    window = clipped;
                } else if p.user(&o.owner).is_some_and(|u| !u.is_exclusive()) {
                    let covered = p
                        .users()
                        .any(|u| u.exclusives_on(&o.satellite).any(|e| e.window.overlaps(&o.window)));
                    if covered {
                        force_off = true;
                    }
                }
            }
            bounds.push(LpBound {
                var: t(s.id.as_str(), o.id.as_str()),
                lo: window.start,
                hi: window.end,
            });
            if force_off {
                bounds.push(LpBound {
                    var: x(s.id.as_str(), o.id.as_str()),
                    lo: 0.0,
                    hi: 0.0,
                });
            }
        }
    }

    let mut binaries = Vec::new();
    for s in &sats {
        for o in &obs {
            binaries.push(x(s.id.as_str(), o.id.as_str()));
        }
    }
    for s in &sats {
        for o in &obs {
            for q in &obs {
                if o.id != q.id {
                    binaries.push(beta(s.id.as_str(), o.id.as_str(), q.id.as_str()));
                }
            }
        }
    }

    let n = obs.len();
    Ok(MilpModel {
        name: "eoscsp".to_string(),
        objective,
        rows,
        bounds,
        binaries,
        n_x: sats.len() * n,
        n_t: sats.len() * n,
        n_beta: sats.len() * n * n.saturating_sub(1),
    })
}

/// Strict-mode start range for a foreign observation: the longest
/// exclusive-free slice of its window that fits the duration, shrunk so the
/// whole run stays outside exclusives. Exclusive-owned observations are
/// left alone (the reward boost handles them). `None` means "no tightening
/// possible": either the observation is exclusive-owned, its window is
/// untouched by exclusives, or no free slice fits.
fn strict_window(p: &Instance, o: &Observation) -> Option<TimeWindow> {
    if p.user(&o.owner).is_some_and(|u| u.is_exclusive()) {
        return None;
    }
    let holes: Vec<TimeWindow> = p
        .users()
        .flat_map(|u| u.exclusives_on(&o.satellite).map(|e| e.window))
        .collect();
    if !holes.iter().any(|h| h.overlaps(&o.window)) {
        return None;
    }
    subtract_intervals(o.window, &holes)
        .into_iter()
        .filter(|f| f.fits(o.duration))
        .max_by(|a, b| {
            a.length()
                .total_cmp(&b.length())
                .then(b.start.total_cmp(&a.start))
        })
        .map(|f| TimeWindow {
            start: f.start,
            end: f.end - o.duration,
        })
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn write_terms(out: &mut String, terms: &[(String, f64)]) {
    for (i, (var, coeff)) in terms.iter().enumerate() {
        let magnitude = coeff.abs();
        if i == 0 {
            if *coeff < 0.0 {
                out.push_str("- ");
            }
        } else if *coeff < 0.0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if magnitude != 1.0 {
            out.push_str(&fmt_num(magnitude));
            out.push(' ');
        }
        out.push_str(var);
    }
}

/// Renders the model in LP text format; byte-stable for a given model.
pub fn export_lp(m: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("\\ {}\n", m.name));
    out.push_str("Maximize\n obj: ");
    write_terms(&mut out, &m.objective);
    out.push_str("\nSubject To\n");
    for row in &m.rows {
        out.push_str(&format!(" {}: ", row.name));
        write_terms(&mut out, &row.terms);
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
        };
        out.push_str(&format!(" {} {}\n", sense, fmt_num(row.rhs)));
    }
    out.push_str("Bounds\n");
    for b in &m.bounds {
        out.push_str(&format!(" {} <= {} <= {}\n", fmt_num(b.lo), b.var, fmt_num(b.hi)));
    }
    out.push_str("Binaries\n");
    for chunk in m.binaries.chunks(8) {
        out.push(' ');
        out.push_str(&chunk.join(" "));
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

pub fn write_lp(m: &MilpModel, path: &std::path::Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(export_lp(m).as_bytes())
}
