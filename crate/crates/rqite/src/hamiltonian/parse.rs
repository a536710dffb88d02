//! Line-oriented Hamiltonian text format:
//!
//! ```text
//! # n_qubits = 3
//! 1.0 Z0 Z1
//! -0.5e-1 X2   # trailing comments are allowed
//! ```
//!
//! The `# n_qubits = N` comment is optional; without it (and without an
//! explicit option) the register size is one past the largest index.

use super::{LocalHamiltonian, Pauli, PauliString};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    pub n_qubits: Option<usize>,
    /// Divide every coefficient by the largest `|λ|` after merging.
    pub normalize_coeffs: bool,
}

#[derive(Clone, Debug)]
pub struct Parsed {
    pub hamiltonian: LocalHamiltonian,
    /// Factor the coefficients were divided by (1 without normalization).
    pub scale: f64,
}

fn directive(comment: &str) -> Option<&str> {
    let rest = comment.trim().strip_prefix("n_qubits")?;
    Some(rest.trim().strip_prefix('=')?.trim())
}

pub fn parse_hamiltonian(text: &str, opts: &ParseOptions) -> Result<Parsed> {
    let mut declared: Option<usize> = None;
    let mut raw: Vec<(usize, f64, Vec<(usize, Pauli)>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let err = |msg: String| Error::Parse { line: lineno, msg };
        let (body, comment) = match line.find('#') {
            Some(p) => (&line[..p], Some(&line[p + 1..])),
            None => (line, None),
        };
        if let Some(v) = comment.and_then(directive) {
            if body.trim().is_empty() {
                declared = Some(v.parse().map_err(|_| err(format!("bad n_qubits value {v:?}")))?);
            }
        }
        let mut tokens = body.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        let coeff: f64 = first
            .parse()
            .map_err(|_| err(format!("bad coefficient {first:?}")))?;
        if !coeff.is_finite() {
            return Err(err(format!("non-finite coefficient {first:?}")));
        }
        let mut ops = Vec::new();
        for tok in tokens {
            let mut chars = tok.chars();
            let letter = chars
                .next()
                .and_then(Pauli::from_char)
                .ok_or_else(|| err(format!("bad Pauli token {tok:?}")))?;
            let idx: usize = chars
                .as_str()
                .parse()
                .map_err(|_| err(format!("bad qubit index in {tok:?}")))?;
            if ops.iter().any(|&(q, _)| q == idx) {
                return Err(err(format!("duplicate qubit index {idx}")));
            }
            ops.push((idx, letter));
        }
        if ops.iter().all(|&(_, p)| p == Pauli::I) {
            return Err(err("term has no non-identity letter".into()));
        }
        raw.push((lineno, coeff, ops));
    }
    let inferred = raw
        .iter()
        .flat_map(|(_, _, ops)| ops.iter().map(|&(q, _)| q + 1))
        .max()
        .unwrap_or(0);
    let n = opts.n_qubits.or(declared).unwrap_or(inferred);
    let mut terms = Vec::with_capacity(raw.len());
    for (line, coeff, ops) in raw {
        if let Some(&(q, _)) = ops.iter().find(|&&(q, _)| q >= n) {
            return Err(Error::Parse {
                line,
                msg: format!("qubit index {q} >= n_qubits {n}"),
            });
        }
        terms.push((coeff, PauliString::new(n, ops)?));
    }
    if terms.is_empty() {
        return Err(Error::InvalidInput("empty term list".into()));
    }
    let mut h = LocalHamiltonian::new(n, terms)?;
    let mut scale = 1.0;
    if opts.normalize_coeffs {
        scale = h.max_abs_coeff();
        h = h.scaled(1.0 / scale)?;
    }
    Ok(Parsed {
        hamiltonian: h,
        scale,
    })
}

/// Canonical text form: the `n_qubits` directive, then one term per line
/// with letters sorted by qubit.
pub fn serialize_hamiltonian(h: &LocalHamiltonian) -> String {
    let mut out = format!("# n_qubits = {}\n", h.n_qubits());
    for t in h.terms() {
        out.push_str(&format!("{} {}\n", t.coeff, t.op));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Parsed> {
        parse_hamiltonian(text, &ParseOptions::default())
    }

    #[test]
    fn two_terms() {
        let h = parse("1.0 Z0 Z1\n0.5 X0").unwrap().hamiltonian;
        assert_eq!(h.n_terms(), 2);
        assert_eq!(h.locality(), 2);
        assert_eq!(h.n_qubits(), 2);
    }

    #[test]
    fn cancellation_is_empty_after_merge() {
        let e = parse("1.0 Z0 Z1\n-1.0 Z0 Z1").unwrap_err();
        assert!(e.to_string().contains("empty after merge"));
    }

    #[test]
    fn explicit_register_size() {
        let opts = ParseOptions {
            n_qubits: Some(3),
            ..Default::default()
        };
        let h = parse_hamiltonian("0.3 Y2", &opts).unwrap().hamiltonian;
        assert_eq!(h.n_qubits(), 3);
        assert_eq!(h.terms()[0].op.support().collect::<Vec<_>>(), vec![2]);
        let opts = ParseOptions {
            n_qubits: Some(2),
            ..Default::default()
        };
        assert!(matches!(
            parse_hamiltonian("0.3 Y2", &opts),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse("abc Z0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("# c\n1.0 Q0"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("1.0 Z0 X0"), Err(Error::Parse { .. })));
        assert!(matches!(parse("1.0"), Err(Error::Parse { .. })));
        assert!(parse("# only comments\n").is_err());
    }

    #[test]
    fn comments_scientific_and_directive() {
        let text = "# n_qubits = 5\n  2.5e-1 X1 # tail\n\n-1E0 Z4 Z0\n";
        let h = parse(text).unwrap().hamiltonian;
        assert_eq!(h.n_qubits(), 5);
        assert_eq!(
            serialize_hamiltonian(&h),
            "# n_qubits = 5\n0.25 X1\n-1 Z0 Z4\n"
        );
    }

    #[test]
    fn normalize_coeffs_reports_scale() {
        let p = parse_hamiltonian(
            "2 Z0\n-4 X1",
            &ParseOptions {
                normalize_coeffs: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(p.scale, 4.0);
        assert_eq!(p.hamiltonian.terms()[1].coeff, -1.0);
    }
}
