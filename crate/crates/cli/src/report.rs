//! Plain-text and CSV reports.

use std::fmt::Write;

use dualtri::complex::mask_corners;
use dualtri::laplace::{Hypothesis, SemidefinitenessReport};
use dualtri::metric::recover_weights;
use dualtri::regularity::{classify_hinges, is_edge_positive};
use dualtri::{DualGeometry, Execution, MeshDocument, SimplicialComplex};

use crate::Outcome;

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Structural summary of a parsed mesh and whether the compatibility check
/// passed at `tolerance`.
pub fn validation(doc: &MeshDocument, tolerance: f64) -> Outcome<(String, bool)> {
    let c = &doc.complex;
    let d = doc.metric.to_duality(c)?;
    let compat = d.compatibility(c, tolerance)?;
    let mut s = String::new();
    let _ = writeln!(s, "status: {}", if compat.pass() { "valid" } else { "invalid" });
    let _ = writeln!(s, "dimension: {}", c.dim());
    let _ = writeln!(s, "kind: {}", doc.metric.kind().name());
    for k in 0..=c.dim() {
        let _ = writeln!(s, "{k}-simplices: {}", c.num_simplices(k));
    }
    let _ = writeln!(s, "glued: {}", yes_no(c.is_glued()));
    let _ = writeln!(s, "closed: {}", yes_no(c.is_closed()));
    let _ = writeln!(s, "connected: {}", yes_no(c.is_connected()));
    let _ = writeln!(s, "euler characteristic: {}", c.euler_characteristic());
    let _ = writeln!(s, "max compatibility residual: {:.3e}", compat.max_abs());
    for t in compat.failures() {
        let _ = writeln!(s, "incompatible triangle: {t} (residual {:.3e})", compat.residuals[t]);
    }
    if c.is_connected() {
        let recovery = recover_weights(c, &d, 0, 0.0)?;
        let scale = d.lengths().iter().fold(0.0f64, |a, l| a.max(l.abs())).powi(2);
        let worst = recovery.cycles.iter().max_by(|a, b| a.residual.abs().total_cmp(&b.residual.abs()));
        match worst {
            Some(w) if w.residual.abs() > tolerance * scale => {
                let _ = writeln!(s, "loop property: fails (residual {:.6e} around edges {:?})", w.residual, w.edges);
            }
            _ => {
                let _ = writeln!(s, "loop property: holds");
            }
        }
    }
    if c.dim() == 2 {
        let positive = is_edge_positive(c, &d).map(|p| p.is_positive()).unwrap_or(false);
        let _ = writeln!(s, "edge positive: {}", yes_no(positive));
    }
    let reports = classify_hinges(c, &d, Execution::default());
    let regular = reports.iter().filter(|r| r.as_ref().is_ok_and(|r| r.is_regular())).count();
    let _ = writeln!(s, "regular hinges: {regular}/{}", reports.len());
    Ok((s, compat.pass()))
}

fn face_label(c: &SimplicialComplex, t: usize, mask: u32) -> String {
    mask_corners(mask)
        .into_iter()
        .map(|corner| c.vertex_label(c.top_vertex(t, corner)).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Volumes of every simplex and of its dual cell, then every face center in
/// the local frame of each top simplex.
pub fn dual_geometry(c: &SimplicialComplex, g: &DualGeometry) -> String {
    let check = g.total_volume_check();
    let mut s = String::new();
    let _ = writeln!(s, "# total volume {:.16e}", check.simplex_total);
    let _ = writeln!(s, "# dual vertex volume {:.16e}", check.dual_vertex_total);
    let _ = writeln!(s, "# perpendicularity residual {:.3e}", g.perpendicularity_residual());
    let _ = writeln!(s, "# frame cross-check residual {:.3e}", g.cross_check_residual());
    let _ = writeln!(s, "dim,simplex,vertices,volume,dual_volume");
    for k in 0..=c.dim() {
        for id in 0..c.num_simplices(k) {
            let vertices: Vec<String> =
                c.simplex(k, id).vertices.iter().map(|&v| c.vertex_label(v).to_string()).collect();
            let _ = writeln!(
                s,
                "{k},{id},{},{:.16e},{:.16e}",
                vertices.join(" "),
                g.simplex_volume(k, id),
                g.dual_volume(k, id)
            );
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "top,face,center");
    for t in 0..c.num_tops() {
        for mask in 1..(1u32 << (c.dim() + 1)) {
            let coords: Vec<String> = g.top(t).center(mask).iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(s, "{t},{},{}", face_label(c, t, mask), coords.join(" "));
        }
    }
    s
}

pub fn spectrum(check: &SemidefinitenessReport, hypotheses: &[Hypothesis]) -> String {
    let mut s = String::new();
    let names: Vec<&str> = hypotheses.iter().map(|h| h.name()).collect();
    let _ = writeln!(s, "# hypotheses {}", if names.is_empty() { "none".to_string() } else { names.join(" ") });
    let _ = writeln!(s, "# max eigenvalue {:.3e} (scale {:.3e})", check.max_eigenvalue, check.scale);
    let _ = writeln!(s, "# zero eigenvalues {}", check.near_zero);
    let _ = writeln!(s, "# constant nullspace {}", yes_no(check.nullspace_is_constant));
    let _ = writeln!(s, "# negative semidefinite {}", yes_no(check.pass()));
    let _ = writeln!(s, "index,eigenvalue");
    for (i, ev) in check.eigenvalues.iter().enumerate() {
        let _ = writeln!(s, "{i},{ev:.16e}");
    }
    s
}
