use std::fmt::Write as _;

use sparsemech_core::AuditReport;

use crate::formats::Provenance;

/// `condition_id,t,D,tau,satisfied`
pub fn write_audit_csv(report: &AuditReport, prov: &Provenance) -> String {
    let mut out = String::new();
    prov.write_comment(&mut out);
    let _ = writeln!(out, "# violations={} max_ratio={:?}", report.violation_count, report.max_ratio);
    out.push_str("condition_id,t,D,tau,satisfied\n");
    for r in &report.rows {
        let _ = writeln!(out, "{},{},{:?},{:?},{}", r.condition_id, r.t, r.d, r.tau, r.satisfied);
    }
    out
}

/// Per-step error and bound for one condition: `t,D,bound`.
pub fn write_curve_csv(report: &AuditReport, condition_id: u64, prov: &Provenance) -> String {
    let mut out = String::new();
    prov.write_comment(&mut out);
    let _ = writeln!(out, "# condition_id={condition_id}");
    out.push_str("t,D,bound\n");
    for (t, d, tau) in report.curve(condition_id) {
        let _ = writeln!(out, "{t},{d:?},{tau:?}");
    }
    out
}
