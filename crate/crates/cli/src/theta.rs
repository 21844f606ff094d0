//! Evolution-time expressions such as `pi/sqrt(10)` or `2*π/√22`.

use anyhow::{bail, Context, Result};

/// Evaluates a θ expression. Accepts `pi`/`π`, `sqrt(..)`/`√`, numbers and
/// `+ - * /` with parentheses.
pub fn parse_theta(expr: &str) -> Result<f64> {
    let normalized = normalize(expr);
    if normalized.trim().is_empty() {
        bail!("empty theta expression");
    }
    let value =
        exmex::eval_str::<f64>(&normalized).with_context(|| format!("cannot evaluate theta expression {expr:?}"))?;
    if !value.is_finite() {
        bail!("theta expression {expr:?} is not finite ({value})");
    }
    Ok(value)
}

/// clap value parser wrapper.
pub fn theta_arg(expr: &str) -> std::result::Result<f64, String> {
    parse_theta(expr).map_err(|e| format!("{e:#}"))
}

/// Rewrites `pi` and the unicode spellings into the evaluator's syntax. `√x`
/// binds to the following number or parenthesized group.
fn normalize(expr: &str) -> String {
    let chars: Vec<char> = expr.replace('π', "PI").replace("pi", "PI").replace('−', "-").chars().collect();
    let mut out = String::with_capacity(chars.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        if chars[i] != '√' {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        out.push_str("sqrt");
        i += 1;
        if i < chars.len() && chars[i] == '(' {
            continue;
        }
        out.push('(');
        while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
            out.push(chars[i]);
            i += 1;
        }
        out.push(')');
    }
    out
}
