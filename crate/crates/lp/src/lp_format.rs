//! Reading and writing the LP text format (`Minimize` / `Subject To` / `Bounds` / `Binaries` / `End`).
//!
//! Numbers are written with 9 significant digits. The reader accepts the
//! subset of the format produced by [`write_lp`] plus the common spelling
//! variants (`min`, `st`, `s.t.`, `Binary`, `=<`, `free`, `-inf`).

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::LpError;
use crate::problem::{BinaryMarking, LinearProgram, Relation, Sense};

const TERMS_PER_LINE: usize = 8;

/// Formats `v` rounded to `digits` significant digits in its shortest decimal form.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".to_string() } else { v.to_string() };
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), v).parse().unwrap_or(v);
    format!("{rounded}")
}

fn num(v: f64) -> String {
    format_significant(v, 9)
}

fn sanitize(name: &str, fallback: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']') { c } else { '_' })
        .collect();
    if out.is_empty() {
        out = fallback.to_string();
    }
    if out.starts_with(|c: char| c.is_ascii_digit() || c == '.') || is_reserved(&out) {
        out.insert(0, '_');
    }
    out
}

fn is_reserved(s: &str) -> bool {
    let l = s.to_ascii_lowercase();
    matches!(l.as_str(), "inf" | "infinity" | "free" | "st" | "end" | "bounds" | "binary" | "binaries" | "bin")
        || l.starts_with('e') && l[1..].chars().all(|c| c.is_ascii_digit()) && l.len() > 1
}

fn write_linear(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    let mut written = 0;
    for &(j, a) in terms {
        if a == 0.0 {
            continue;
        }
        if written > 0 && written % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        if written == 0 && a > 0.0 {
            let _ = write!(out, " {} {}", num(a), names[j]);
        } else {
            let _ = write!(out, " {sign} {} {}", num(a.abs()), names[j]);
        }
        written += 1;
    }
    if written == 0 {
        let _ = write!(out, " 0 {}", names.first().map(String::as_str).unwrap_or("x"));
    }
}

/// Renders `problem` as LP text.
pub fn to_lp_string(problem: &LinearProgram, marking: &BinaryMarking) -> String {
    let names: Vec<String> =
        problem.var_names.iter().enumerate().map(|(j, n)| sanitize(n, &format!("x{j}"))).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", problem.name);
    out.push_str(match problem.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    let terms: Vec<(usize, f64)> = problem.objective.iter().copied().enumerate().collect();
    let has_terms = terms.iter().any(|&(_, c)| c != 0.0);
    if has_terms {
        write_linear(&mut out, &terms, &names);
    }
    if problem.objective_offset != 0.0 || !has_terms {
        let c = problem.objective_offset;
        if has_terms {
            let _ = write!(out, " {} {}", if c < 0.0 { '-' } else { '+' }, num(c.abs()));
        } else {
            let _ = write!(out, " {}", num(c));
        }
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for (i, row) in problem.constraints.iter().enumerate() {
        let _ = write!(out, " {}:", sanitize(&row.name, &format!("r{i}")));
        write_linear(&mut out, &row.terms, &names);
        let rel = match row.relation {
            Relation::LessEq => "<=",
            Relation::Equal => "=",
            Relation::GreaterEq => ">=",
        };
        let _ = writeln!(out, " {rel} {}", num(row.rhs));
    }

    out.push_str("Bounds\n");
    for j in 0..problem.n_vars() {
        let (lo, hi, name) = (problem.lower[j], problem.upper[j], &names[j]);
        let line = match (lo.is_finite(), hi.is_finite()) {
            (false, false) => format!(" {name} free"),
            (true, false) => format!(" {name} >= {}", num(lo)),
            (false, true) => format!(" -inf <= {name} <= {}", num(hi)),
            (true, true) if lo == hi => format!(" {name} = {}", num(lo)),
            (true, true) => format!(" {} <= {name} <= {}", num(lo), num(hi)),
        };
        out.push_str(&line);
        out.push('\n');
    }

    if !marking.is_empty() {
        out.push_str("Binaries\n");
        for chunk in marking.indices.chunks(TERMS_PER_LINE) {
            let line: Vec<&str> = chunk.iter().map(|&j| names[j].as_str()).collect();
            let _ = writeln!(out, " {}", line.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp<W: Write>(problem: &LinearProgram, marking: &BinaryMarking, mut w: W) -> Result<(), LpError> {
    problem.validate()?;
    marking.validate(problem)?;
    w.write_all(to_lp_string(problem, marking).as_bytes())?;
    Ok(())
}

pub fn write_lp_file(problem: &LinearProgram, marking: &BinaryMarking, path: &Path) -> Result<(), LpError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_lp(problem, marking, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(Op),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Plus,
    Minus,
    Colon,
    Le,
    Ge,
    Eq,
}

fn lex(line: &str, line_no: usize) -> Result<Vec<Token>, LpError> {
    let err = |message: String| LpError::Parse { line: line_no, message };
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            break;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            tokens.push(Token::Num(text.parse().map_err(|_| err(format!("bad number '{text}'")))?));
        } else if c.is_ascii_alphabetic() || matches!(c, '_' | '[' | ']' | '.') {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '.' | '[' | ']')) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            match text.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => tokens.push(Token::Num(f64::INFINITY)),
                _ => tokens.push(Token::Ident(text)),
            }
        } else {
            let next = chars.get(i + 1).copied();
            let (op, width) = match (c, next) {
                ('+', _) => (Op::Plus, 1),
                ('-', _) => (Op::Minus, 1),
                (':', _) => (Op::Colon, 1),
                ('<', Some('=')) | ('=', Some('<')) => (Op::Le, 2),
                ('>', Some('=')) | ('=', Some('>')) => (Op::Ge, 2),
                ('<', _) => (Op::Le, 1),
                ('>', _) => (Op::Ge, 1),
                ('=', _) => (Op::Eq, 1),
                _ => return Err(err(format!("unexpected character '{c}'"))),
            };
            tokens.push(Token::Op(op));
            i += width;
        }
    }
    Ok(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_header(line: &str) -> Option<(Section, Option<Sense>)> {
    let l = line.trim().to_ascii_lowercase();
    match l.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some((Section::Objective, Some(Sense::Minimize))),
        "maximize" | "maximise" | "maximum" | "max" => Some((Section::Objective, Some(Sense::Maximize))),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some((Section::Constraints, None)),
        "bounds" | "bound" => Some((Section::Bounds, None)),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, None)),
        "end" => Some((Section::End, None)),
        _ => None,
    }
}

struct Builder {
    lp: LinearProgram,
    index: std::collections::HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.lp.add_var(name, 0.0, f64::INFINITY, 0.0);
        self.index.insert(name.to_string(), j);
        j
    }
}

/// Parses `[label:] ±c x ±c y ... ±k`, returning terms, constant and the unconsumed remainder.
fn parse_expression<'t>(
    b: &mut Builder,
    tokens: &'t [Token],
    line: usize,
) -> Result<(Option<String>, Vec<(usize, f64)>, f64, &'t [Token]), LpError> {
    let mut rest = tokens;
    let mut label = None;
    if let [Token::Ident(name), Token::Op(Op::Colon), tail @ ..] = rest {
        label = Some(name.clone());
        rest = tail;
    }
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut constant = 0.0;
    loop {
        let mut sign = 1.0;
        let mut saw_sign = false;
        while let [Token::Op(op @ (Op::Plus | Op::Minus)), tail @ ..] = rest {
            if *op == Op::Minus {
                sign = -sign;
            }
            saw_sign = true;
            rest = tail;
        }
        match rest {
            [Token::Num(c), Token::Ident(name), tail @ ..] => {
                let j = b.var(name);
                terms.push((j, sign * c));
                rest = tail;
            }
            [Token::Num(c), tail @ ..] => {
                constant += sign * c;
                rest = tail;
            }
            [Token::Ident(name), tail @ ..] => {
                let j = b.var(name);
                terms.push((j, sign));
                rest = tail;
            }
            _ => {
                if saw_sign {
                    return Err(LpError::Parse { line, message: "dangling sign".into() });
                }
                break;
            }
        }
    }
    Ok((label, terms, constant, rest))
}

fn signed_number(tokens: &[Token]) -> Option<(f64, &[Token])> {
    match tokens {
        [Token::Op(Op::Minus), Token::Num(v), rest @ ..] => Some((-v, rest)),
        [Token::Op(Op::Plus), Token::Num(v), rest @ ..] | [Token::Num(v), rest @ ..] => Some((*v, rest)),
        _ => None,
    }
}

fn apply_bound(b: &mut Builder, name: &str, op: Op, value: f64, var_on_left: bool) {
    let j = b.var(name);
    let op = match (op, var_on_left) {
        (Op::Le, false) => Op::Ge,
        (Op::Ge, false) => Op::Le,
        (o, _) => o,
    };
    match op {
        Op::Le => b.lp.upper[j] = value,
        Op::Ge => b.lp.lower[j] = value,
        _ => {
            b.lp.lower[j] = value;
            b.lp.upper[j] = value;
        }
    }
}

fn parse_bound(b: &mut Builder, tokens: &[Token], line: usize) -> Result<(), LpError> {
    let err = || LpError::Parse { line, message: "unrecognized bound".into() };
    match tokens {
        [Token::Ident(name), Token::Ident(kw)] if kw.eq_ignore_ascii_case("free") => {
            let j = b.var(name);
            b.lp.lower[j] = f64::NEG_INFINITY;
            b.lp.upper[j] = f64::INFINITY;
            Ok(())
        }
        [Token::Ident(name), Token::Op(op), rest @ ..] => {
            let (v, tail) = signed_number(rest).ok_or_else(err)?;
            if !tail.is_empty() {
                return Err(err());
            }
            apply_bound(b, name, *op, v, true);
            Ok(())
        }
        _ => {
            let (v, rest) = signed_number(tokens).ok_or_else(err)?;
            match rest {
                [Token::Op(op), Token::Ident(name)] => {
                    apply_bound(b, name, *op, v, false);
                    Ok(())
                }
                [Token::Op(op1), Token::Ident(name), Token::Op(op2), tail @ ..] => {
                    let (w, tail) = signed_number(tail).ok_or_else(err)?;
                    if !tail.is_empty() {
                        return Err(err());
                    }
                    let name = name.clone();
                    apply_bound(b, &name, *op1, v, false);
                    apply_bound(b, &name, *op2, w, true);
                    Ok(())
                }
                _ => Err(err()),
            }
        }
    }
}

/// Parses LP text back into a problem plus its binary marking.
pub fn parse_lp(text: &str) -> Result<(LinearProgram, BinaryMarking), LpError> {
    let mut b = Builder { lp: LinearProgram::new("", Sense::Minimize), index: Default::default() };
    let mut section = Section::Preamble;
    let mut objective_tokens: Vec<Token> = Vec::new();
    let mut pending: Vec<Token> = Vec::new();
    let mut pending_line = 0;
    let mut binaries = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        if let Some(rest) = raw.trim_start().strip_prefix("\\ Problem:") {
            b.lp.name = rest.trim().to_string();
            continue;
        }
        if let Some((next, sense)) = section_header(raw) {
            if let Some(s) = sense {
                b.lp.sense = s;
            }
            section = next;
            continue;
        }
        let tokens = lex(raw, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        match section {
            Section::Preamble | Section::End => {
                return Err(LpError::Parse { line: line_no, message: "content outside any section".into() })
            }
            Section::Objective => objective_tokens.extend(tokens),
            Section::Constraints => {
                if pending.is_empty() {
                    pending_line = line_no;
                }
                pending.extend(tokens);
                // A row is complete once a relation has been followed by its right-hand side.
                let rel_at = pending.iter().position(|t| matches!(t, Token::Op(Op::Le | Op::Ge | Op::Eq)));
                if let Some(p) = rel_at {
                    if signed_number(&pending[p + 1..]).is_some() {
                        let row = std::mem::take(&mut pending);
                        parse_row(&mut b, &row, pending_line)?;
                    }
                }
            }
            Section::Bounds => parse_bound(&mut b, &tokens, line_no)?,
            Section::Binaries => {
                for t in tokens {
                    match t {
                        Token::Ident(name) => binaries.push(b.var(&name)),
                        _ => return Err(LpError::Parse { line: line_no, message: "expected a variable name".into() }),
                    }
                }
            }
        }
    }
    if !pending.is_empty() {
        return Err(LpError::Parse { line: pending_line, message: "unterminated constraint".into() });
    }
    // Objective parsed last so variables keep first-appearance order from the objective onward.
    let (_, terms, constant, rest) = parse_expression(&mut b, &objective_tokens, 0)?;
    if !rest.is_empty() {
        return Err(LpError::Parse { line: 0, message: "trailing tokens in objective".into() });
    }
    for (j, c) in terms {
        b.lp.objective[j] += c;
    }
    b.lp.objective_offset = constant;
    for &j in &binaries {
        b.lp.lower[j] = b.lp.lower[j].max(0.0);
        b.lp.upper[j] = b.lp.upper[j].min(1.0);
    }
    Ok((b.lp, BinaryMarking::new(binaries)))
}

fn parse_row(b: &mut Builder, tokens: &[Token], line: usize) -> Result<(), LpError> {
    let (label, terms, constant, rest) = parse_expression(b, tokens, line)?;
    let relation = match rest.first() {
        Some(Token::Op(Op::Le)) => Relation::LessEq,
        Some(Token::Op(Op::Ge)) => Relation::GreaterEq,
        Some(Token::Op(Op::Eq)) => Relation::Equal,
        _ => return Err(LpError::Parse { line, message: "expected a relation".into() }),
    };
    let (rhs, tail) =
        signed_number(&rest[1..]).ok_or(LpError::Parse { line, message: "expected a right-hand side".into() })?;
    if !tail.is_empty() {
        return Err(LpError::Parse { line, message: "trailing tokens after right-hand side".into() });
    }
    let name = label.unwrap_or_else(|| format!("r{}", b.lp.n_constraints()));
    b.lp.add_constraint(name, terms, relation, rhs - constant);
    Ok(())
}
