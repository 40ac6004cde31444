//! Quartic (`p = 2`) coefficients of `log Z` checked against reference closed forms.

use serde::Serialize;

use super::action::logz_series;
use super::poly::{q, BivariatePoly};
use crate::error::Result;
use crate::oracle::Representation;

#[derive(Debug, Clone, Serialize)]
pub struct QuarticRow {
    pub order: usize,
    pub label: String,
    pub engine: BivariatePoly,
    pub reference: BivariatePoly,
    /// `engine == reference`.
    pub raw_match: bool,
    /// `engine / (N_l N_r) == reference`.
    pub normalized_match: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuarticReport {
    pub rows: Vec<QuarticRow>,
}

fn nl(k: i32) -> BivariatePoly {
    BivariatePoly::n_l_pow(k)
}

fn nr(k: i32) -> BivariatePoly {
    BivariatePoly::n_r_pow(k)
}

fn reference_forms() -> Vec<(usize, &'static str, BivariatePoly)> {
    let sum = &nl(1) + &nr(1);
    let first = -&(&sum * &nr(-1));
    // 5 N_l² + N_l/N_r + 2 N_l (N_l² + N_r²)/N_r
    let pt2 = &(&nl(2).scale(&q(5)) + &(&nl(1) * &nr(-1)))
        + &(&(&nl(1) * &(&nl(2) + &nr(2))) * &nr(-1)).scale(&q(2));
    let lve_tail = &nl(1) * &nr(-1);
    let lve_head = &(&nl(1) * &(&sum * &sum)) * &nr(-1);
    // 2 N_l (N_l+N_r)²/N_r · N_l² + N_l/N_r, read as a product.
    let lve_literal = &(&lve_head * &nl(2)).scale(&q(2)) + &lve_tail;
    // 2 N_l (N_l+N_r)²/N_r + N_l² + N_l/N_r, with the missing sum restored.
    let lve_plus = &(&lve_head.scale(&q(2)) + &nl(2)) + &lve_tail;
    vec![
        (1, "first order", first),
        (2, "second order, perturbative total", pt2),
        (2, "second order, vertex expansion, literal product reading", lve_literal),
        (2, "second order, vertex expansion with '+' restored", lve_plus),
    ]
}

/// Engine coefficients of `log Z` against every reference form, in both normalizations.
pub fn quartic_report() -> Result<QuarticReport> {
    let original = logz_series(2, 2, Representation::Original)?;
    let lvr = logz_series(2, 2, Representation::Lvr)?;
    debug_assert_eq!(original, lvr);
    let norm = &nl(-1) * &nr(-1);
    let rows = reference_forms()
        .into_iter()
        .map(|(order, label, reference)| {
            let engine = original[order - 1].clone();
            QuarticRow {
                order,
                label: label.to_string(),
                raw_match: engine == reference,
                normalized_match: &engine * &norm == reference,
                reference,
                engine,
            }
        })
        .collect();
    Ok(QuarticReport { rows })
}

impl QuarticReport {
    /// One line per monomial: `order,label,coefficient,n_l_power,n_r_power`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("order,label,coefficient,n_l_power,n_r_power\n");
        let mut seen = Vec::new();
        for row in &self.rows {
            let mut emit = |label: &str, p: &BivariatePoly| {
                for (&(i, j), c) in p.terms() {
                    out.push_str(&format!("{},\"{}\",{},{},{}\n", row.order, label, c, i, j));
                }
            };
            if !seen.contains(&row.order) {
                seen.push(row.order);
                emit("engine", &row.engine);
            }
            emit(&row.label, &row.reference);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_flags() {
        let r = quartic_report().unwrap();
        let flags: Vec<(bool, bool)> = r.rows.iter().map(|x| (x.raw_match, x.normalized_match)).collect();
        assert_eq!(flags, vec![(false, true), (true, false), (false, false), (true, false)]);
        let one = q(1);
        for row in &r.rows {
            let v = row.engine.eval(&one, &one);
            assert_eq!(v, q(if row.order == 1 { -2 } else { 10 }));
        }
    }

    #[test]
    fn csv_has_exact_coefficients() {
        let csv = quartic_report().unwrap().to_csv();
        assert!(csv.starts_with("order,label,coefficient"));
        assert!(csv.contains("\"engine\",-1,"));
    }
}
