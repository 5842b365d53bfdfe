//! Gate-level circuits and an OpenQASM 2.0 subset.
//!
//! Qubit `q` is bit `q` of a computational basis index, so `q[0]` is the
//! rightmost character of a printed bitstring.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numfmt::sig12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Cnot { control: usize, target: usize },
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    fn qasm(&self) -> String {
        match *self {
            Gate::H(q) => format!("h q[{q}];"),
            Gate::X(q) => format!("x q[{q}];"),
            Gate::Cnot { control, target } => format!("cx q[{control}],q[{target}];"),
            Gate::Rx(q, t) => format!("rx({}) q[{q}];", sig12(t)),
            Gate::Ry(q, t) => format!("ry({}) q[{q}];", sig12(t)),
            Gate::Rz(q, t) => format!("rz({}) q[{q}];", sig12(t)),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.qasm().trim_end_matches(';'))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::invalid(format!(
                "gate {gate} uses qubit {q} on a {}-qubit circuit",
                self.n_qubits
            )));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::invalid(format!(
                "gate {gate} has control equal to target"
            )));
        }
        if let Gate::Rx(_, t) | Gate::Ry(_, t) | Gate::Rz(_, t) = gate {
            if !t.is_finite() {
                return Err(Error::invalid("non-finite rotation angle"));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Appends all gates of `other`, which must have the same width.
    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::invalid("circuit widths differ"));
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    pub fn cnot_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Cnot { .. }))
            .count()
    }

    /// OpenQASM 2.0 text, optionally followed by measurement of every qubit.
    pub fn to_qasm(&self, measure: bool) -> String {
        let n = self.n_qubits;
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        let _ = writeln!(out, "qreg q[{n}];");
        if measure {
            let _ = writeln!(out, "creg c[{n}];");
        }
        for g in &self.gates {
            out.push_str(&g.qasm());
            out.push('\n');
        }
        if measure {
            for q in 0..n {
                let _ = writeln!(out, "measure q[{q}] -> c[{q}];");
            }
        }
        out
    }
}

/// Parses the OpenQASM 2.0 subset written by [`Circuit::to_qasm`].
///
/// Supports one quantum register, `h x cx rx ry rz`, angle expressions in
/// `pi` with `+ - * /` and parentheses. `creg`, `measure` and `barrier`
/// statements are accepted and ignored.
pub fn parse_qasm(text: &str) -> Result<Circuit> {
    let mut register: Option<(String, usize)> = None;
    let mut gates = Vec::new();
    let mut stmt = String::new();
    let mut stmt_line = 1;
    for (line_no, raw) in (1..).zip(text.lines()) {
        let line = raw.split("//").next().unwrap_or("");
        for ch in line.chars() {
            if ch == ';' {
                let s = stmt.trim().to_string();
                if !s.is_empty() {
                    statement(&s, stmt_line, &mut register, &mut gates)?;
                }
                stmt.clear();
            } else {
                if stmt.trim().is_empty() {
                    stmt_line = line_no;
                }
                stmt.push(ch);
            }
        }
        stmt.push(' ');
    }
    if !stmt.trim().is_empty() {
        return Err(Error::parse(stmt_line, "missing ';'"));
    }
    let (_, n) = register.ok_or_else(|| Error::parse(0, "no qreg declared"))?;
    Circuit::from_gates(n, gates)
}

fn statement(
    s: &str,
    line: usize,
    register: &mut Option<(String, usize)>,
    gates: &mut Vec<Gate>,
) -> Result<()> {
    let (head, rest) = match s.find(|c: char| c.is_whitespace() || c == '(') {
        Some(i) => (&s[..i], s[i..].trim_start()),
        None => (s, ""),
    };
    match head {
        "OPENQASM" | "include" | "creg" | "measure" | "barrier" => return Ok(()),
        "qreg" => {
            if register.is_some() {
                return Err(Error::parse(line, "only one qreg is supported"));
            }
            let (name, size) = indexed(rest, line)?;
            *register = Some((name, size));
            return Ok(());
        }
        _ => {}
    }
    let Some((reg, n)) = register.as_ref() else {
        return Err(Error::parse(line, "gate before qreg"));
    };
    let qubit = |arg: &str| -> Result<usize> {
        let (name, idx) = indexed(arg, line)?;
        if &name != reg {
            return Err(Error::parse(line, format!("unknown register '{name}'")));
        }
        if idx >= *n {
            return Err(Error::parse(line, format!("qubit {idx} out of range")));
        }
        Ok(idx)
    };
    let (angle, args) = if let Some(body) = rest.strip_prefix('(') {
        let close = matching_paren(body).ok_or_else(|| Error::parse(line, "unbalanced '('"))?;
        let value = eval_angle(&body[..close]).map_err(|m| Error::parse(line, m))?;
        (Some(value), body[close + 1..].trim())
    } else {
        (None, rest)
    };
    let args: Vec<&str> = args
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .collect();
    let one = |args: &[&str]| -> Result<usize> {
        match args {
            [a] => qubit(a),
            _ => Err(Error::parse(line, format!("{head} takes one qubit"))),
        }
    };
    let need_angle = || angle.ok_or_else(|| Error::parse(line, format!("{head} needs an angle")));
    let gate = match head {
        "h" => Gate::H(one(&args)?),
        "x" => Gate::X(one(&args)?),
        "cx" | "CX" => match args.as_slice() {
            [a, b] => Gate::Cnot {
                control: qubit(a)?,
                target: qubit(b)?,
            },
            _ => return Err(Error::parse(line, "cx takes two qubits")),
        },
        "rx" => Gate::Rx(one(&args)?, need_angle()?),
        "ry" => Gate::Ry(one(&args)?, need_angle()?),
        "rz" => Gate::Rz(one(&args)?, need_angle()?),
        other => return Err(Error::parse(line, format!("unsupported gate '{other}'"))),
    };
    gates.push(gate);
    Ok(())
}

fn indexed(text: &str, line: usize) -> Result<(String, usize)> {
    let text = text.trim();
    let open = text.find('[');
    let close = text.rfind(']');
    match (open, close) {
        (Some(o), Some(c)) if c > o && c == text.len() - 1 => {
            let idx = text[o + 1..c]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("bad index in '{text}'")))?;
            Ok((text[..o].trim().to_string(), idx))
        }
        _ => Err(Error::parse(
            line,
            format!("expected name[index], got '{text}'"),
        )),
    }
}

fn matching_paren(s: &str) -> Option<usize> {
    let mut depth = 1;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Evaluates an angle expression such as `-pi/2` or `0.23`.
pub fn eval_angle(expr: &str) -> std::result::Result<f64, String> {
    let tokens: Vec<char> = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let mut p = ExprParser { s: &tokens, i: 0 };
    let v = p.sum()?;
    if p.i != tokens.len() {
        return Err(format!("unexpected input in angle '{expr}'"));
    }
    if !v.is_finite() {
        return Err(format!("angle '{expr}' is not finite"));
    }
    Ok(v)
}

struct ExprParser<'a> {
    s: &'a [char],
    i: usize,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<char> {
        self.s.get(self.i).copied()
    }

    fn sum(&mut self) -> std::result::Result<f64, String> {
        let mut v = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.i += 1;
            let r = self.product()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> std::result::Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek() {
            self.i += 1;
            let r = self.unary()?;
            v = if c == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> std::result::Result<f64, String> {
        match self.peek() {
            Some('-') => {
                self.i += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> std::result::Result<f64, String> {
        match self.peek() {
            Some('(') => {
                self.i += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err("expected ')'".into());
                }
                self.i += 1;
                Ok(v)
            }
            Some('p') => {
                if self.s.get(self.i + 1) == Some(&'i') {
                    self.i += 2;
                    Ok(std::f64::consts::PI)
                } else {
                    Err("unknown identifier".into())
                }
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.i;
                while let Some(c) = self.peek() {
                    let exp_sign = (c == '-' || c == '+')
                        && matches!(self.s.get(self.i.wrapping_sub(1)), Some('e' | 'E'));
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        self.i += 1;
                    } else {
                        break;
                    }
                }
                let text: String = self.s[start..self.i].iter().collect();
                text.parse().map_err(|_| format!("bad number '{text}'"))
            }
            _ => Err("expected a number".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angles() {
        assert_eq!(eval_angle("0.23").unwrap(), 0.23);
        assert_eq!(eval_angle("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(eval_angle("2*(pi+1)").unwrap(), 2.0 * (PI + 1.0));
        assert_eq!(eval_angle("1.5e-3").unwrap(), 1.5e-3);
        assert!(eval_angle("pi pi").is_err());
        assert!(eval_angle("tau").is_err());
    }

    #[test]
    fn qasm_roundtrip() {
        let c = Circuit::from_gates(
            3,
            vec![
                Gate::X(0),
                Gate::H(2),
                Gate::Cnot {
                    control: 2,
                    target: 1,
                },
                Gate::Rz(1, 0.25),
                Gate::Ry(0, -1.5),
                Gate::Rx(2, 3.0),
            ],
        )
        .unwrap();
        let text = c.to_qasm(true);
        assert!(text.contains("measure q[2] -> c[2];"));
        assert_eq!(parse_qasm(&text).unwrap(), c);
    }

    #[test]
    fn rejects_bad_circuits() {
        assert!(Circuit::from_gates(2, vec![Gate::H(2)]).is_err());
        assert!(Circuit::from_gates(
            2,
            vec![Gate::Cnot {
                control: 1,
                target: 1
            }]
        )
        .is_err());
        assert!(parse_qasm("qreg q[2];\nh q[3];\n").is_err());
        assert!(parse_qasm("qreg q[2];\nccx q[0],q[1];\n").is_err());
        assert!(parse_qasm("h q[0];\n").is_err());
        assert!(parse_qasm("qreg q[1];\nh q[0]\n").is_err());
    }

    #[test]
    fn parses_prep_fixture() {
        let c = parse_qasm(include_str!("../../../fixtures/h2_prep.qasm")).unwrap();
        assert_eq!(c.n_qubits(), 4);
        assert_eq!(c.cnot_count(), 6);
        assert!(c.gates().contains(&Gate::Rz(0, 0.23)));
    }
}
