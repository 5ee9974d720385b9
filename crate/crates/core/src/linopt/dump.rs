//! CPLEX-LP text export, enabled with `PRESCRIPTOR_DUMP_LP=<dir>`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use super::lp::{LinearProgram, RowSense, VarKind};

pub const DUMP_ENV: &str = "PRESCRIPTOR_DUMP_LP";

static COUNTER: AtomicUsize = AtomicUsize::new(0);

fn dump_dir() -> Option<&'static PathBuf> {
    static DIR: OnceLock<Option<PathBuf>> = OnceLock::new();
    DIR.get_or_init(|| std::env::var_os(DUMP_ENV).map(PathBuf::from))
        .as_ref()
}

fn term(out: &mut String, coef: f64, name: &str, first: &mut bool) {
    if coef == 0.0 {
        return;
    }
    let sign = if coef < 0.0 {
        "-"
    } else if *first {
        ""
    } else {
        "+"
    };
    if !sign.is_empty() {
        let _ = write!(out, " {sign}");
    }
    let mag = coef.abs();
    if mag == 1.0 {
        let _ = write!(out, " {name}");
    } else {
        let _ = write!(out, " {mag} {name}");
    }
    *first = false;
}

fn bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn to_lp_text(lp: &LinearProgram) -> String {
    let name = |j: usize| format!("x{j}");
    let mut out = String::from("\\ prescriptor subproblem\nMinimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        term(&mut out, c, &name(j), &mut first);
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, " r{i}:");
        let mut first = true;
        for (j, &a) in row.iter().enumerate() {
            term(&mut out, a, &name(j), &mut first);
        }
        if first {
            out.push_str(" 0 x0");
        }
        let op = match lp.senses[i] {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", lp.rhs[i]);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let _ = writeln!(
            out,
            " {} <= {} <= {}",
            bound(lp.lower[j]),
            name(j),
            bound(lp.upper[j])
        );
    }
    let bins: Vec<String> = (0..lp.num_vars())
        .filter(|&j| lp.integrality[j] == VarKind::Binary)
        .map(name)
        .collect();
    if !bins.is_empty() {
        let _ = writeln!(out, "Binary\n {}", bins.join(" "));
    }
    out.push_str("End\n");
    out
}

/// Writes `lp` to the dump directory when the toggle is set. Failures are logged, not raised.
pub fn maybe_dump(lp: &LinearProgram) {
    let Some(dir) = dump_dir() else { return };
    let id = COUNTER.fetch_add(1, Ordering::Relaxed);
    let path = dir.join(format!("subproblem_{id:08}.lp"));
    if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, to_lp_text(lp)))
    {
        log::warn!("could not dump LP to {}: {e}", path.display());
    }
}
