//! CSV artifacts. Floats are written with 17 significant digits so that
//! files round-trip and compare byte for byte between runs.

use std::io::{self, Write};

use shom::homogenize::{trajectory_from_parts, EffectiveTensor};
use shom::solvers::TraceRecord;
use shom::{MacroscopicLoad, SolveOutcome, StopReason};

pub fn num(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn stop_label(stop: StopReason) -> &'static str {
    match stop {
        StopReason::Gradient => "gradient",
        StopReason::Value => "value",
        StopReason::MaxIter => "max_iter",
    }
}

/// `L̄ε̄:ε̄ / |ε̄|²`, the effective modulus along the load.
pub fn directional_modulus(outcome: &SolveOutcome, load: &MacroscopicLoad) -> f64 {
    outcome.effective_form / load.norm_squared()
}

/// One row per scheme for a single macroscopic load.
pub fn effective_single<W: Write>(
    mut w: W,
    runs: &[(&str, &SolveOutcome)],
    load: &MacroscopicLoad,
    exact: Option<f64>,
) -> io::Result<()> {
    write!(w, "scheme,iterations,stop,L_eff,exact,relative_error")?;
    for k in 0..load.value().len() {
        write!(w, ",mean_stress_{}", k + 1)?;
    }
    writeln!(w)?;
    for (label, out) in runs {
        let l = directional_modulus(out, load);
        let (e, rel) = match exact {
            Some(e) => (num(e), num((l - e).abs() / e.abs())),
            None => (String::new(), String::new()),
        };
        write!(w, "{label},{},{},{},{e},{rel}", out.iterations, stop_label(out.stop), num(l))?;
        for s in &out.mean_stress {
            write!(w, ",{}", num(*s))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Every entry of each assembled tensor, with 1-based storage indices and
/// the run that produced it (the pair run for off-diagonal entries).
pub fn effective_tensors<W: Write>(mut w: W, runs: &[(&str, &EffectiveTensor, &[SolveOutcome])]) -> io::Result<()> {
    writeln!(w, "scheme,i,j,L_ij,iterations,stop")?;
    for (label, tensor, outcomes) in runs {
        let m = tensor.components();
        for i in 0..m {
            for j in 0..m {
                let key = (i.min(j), i.max(j));
                let k = tensor.sources.iter().position(|s| s.components == key).expect("every pair is solved");
                let out = &outcomes[k];
                writeln!(
                    w,
                    "{label},{},{},{},{},{}",
                    i + 1,
                    j + 1,
                    num(tensor.entry(i, j)),
                    out.iterations,
                    stop_label(out.stop)
                )?;
            }
        }
    }
    Ok(())
}

/// How the convergence error of a run is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorReference {
    /// Relative to a closed-form effective modulus.
    ClosedForm(f64),
    /// Relative to the run's own final value.
    FinalValue,
}

impl ErrorReference {
    pub fn name(self) -> &'static str {
        match self {
            ErrorReference::ClosedForm(_) => "closed_form",
            ErrorReference::FinalValue => "final_value",
        }
    }
}

/// `(n, |L_n − L_ref| / |L_ref|)` along a trace.
pub fn error_history(records: &[TraceRecord], reference: ErrorReference) -> Vec<(usize, f64)> {
    let target = match reference {
        ErrorReference::ClosedForm(v) => v,
        ErrorReference::FinalValue => records.last().map_or(0.0, |r| r.leff),
    };
    records.iter().map(|r| (r.n, (r.leff - target).abs() / target.abs())).collect()
}

pub fn convergence_csv<W: Write>(
    mut w: W,
    runs: &[(&str, &[TraceRecord])],
    reference: ErrorReference,
) -> io::Result<()> {
    writeln!(w, "scheme,n,reference,relative_error")?;
    for (label, records) in runs {
        for (n, e) in error_history(records, reference) {
            writeln!(w, "{label},{n},{},{}", reference.name(), num(e))?;
        }
    }
    Ok(())
}

/// `(x, y, z) = (ΔConst, ΔCompat, ΔEquil)` per iterate.
pub fn trajectory_csv<W: Write>(mut w: W, runs: &[(&str, &[TraceRecord])]) -> io::Result<()> {
    writeln!(w, "scheme,n,x,y,z")?;
    for (label, records) in runs {
        for r in *records {
            let [x, y, z] = trajectory_from_parts(&r.parts);
            writeln!(w, "{label},{},{},{},{}", r.n, num(x), num(y), num(z))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use shom::Parts;

    fn record(n: usize, leff: f64) -> TraceRecord {
        TraceRecord {
            n,
            value: 1.0,
            grad_norm: 0.0,
            parts: Parts { compat: 0.1, constitutive: 0.2, equilibrium: 0.3 },
            div_norm: 0.0,
            leff,
        }
    }

    #[test]
    fn error_histories() {
        let rs = [record(0, 2.0), record(1, 1.5), record(2, 1.0)];
        assert_eq!(error_history(&rs, ErrorReference::FinalValue), vec![(0, 1.0), (1, 0.5), (2, 0.0)]);
        assert_eq!(error_history(&rs, ErrorReference::ClosedForm(4.0))[0], (0, 0.5));
    }

    #[test]
    fn trajectory_columns_follow_the_projection_axes() {
        let mut buf = Vec::new();
        trajectory_csv(&mut buf, &[("cg-p", &[record(0, 1.0)])]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "cg-p");
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.2);
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.1);
        assert_eq!(row[4].parse::<f64>().unwrap(), 0.3);
    }

    #[test]
    fn number_format_round_trips() {
        for v in [1.0 / 3.0, 1e-300, -2.5e12, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
