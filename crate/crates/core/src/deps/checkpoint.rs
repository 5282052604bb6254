//! Portable text checkpoint: named tensors, each preceded by a shape header.

use std::fmt::Write as _;
use std::path::Path;

use super::{DesignDistribution, DesignMode, PolicyParams};
use crate::error::{CoreError, Result};
use crate::params::DesignPoint;

const MAGIC: &str = "codesign-checkpoint v1";

struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn push(out: &mut String, name: &str, shape: &[usize], data: &[f64]) {
    let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "tensor {name} {}", dims.join(" "));
    let row = *shape.last().unwrap_or(&1);
    for chunk in data.chunks(row.max(1)) {
        let vals: Vec<String> = chunk.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", vals.join(" "));
    }
}

pub fn to_string(policy: &PolicyParams, design: &DesignMode) -> String {
    let mut out = format!("{MAGIC}\n");
    push(&mut out, "policy.sizes", &[policy.sizes.len()], &policy.sizes.iter().map(|&s| s as f64).collect::<Vec<_>>());
    push(&mut out, "policy.action_scale", &[1], &[policy.action_scale]);
    for (l, (n_out, n_in, w, b)) in policy.layers().enumerate() {
        push(&mut out, &format!("policy.w{l}"), &[n_out, n_in], &policy.theta[w..w + n_out * n_in]);
        push(&mut out, &format!("policy.b{l}"), &[n_out], &policy.theta[b..b + n_out]);
    }
    push(&mut out, "policy.log_std", &[1], &[policy.log_std]);
    match design {
        DesignMode::Fixed(d) => push(&mut out, "design.fixed", &[2], &[d.p_nom, d.b]),
        DesignMode::Learn(dist) => {
            push(&mut out, "design.mean", &[2], &dist.mean);
            push(&mut out, "design.log_std", &[2], &dist.log_std);
            push(&mut out, "design.lower", &[2], &dist.lower);
            push(&mut out, "design.upper", &[2], &dist.upper);
        }
    }
    out.push_str("end\n");
    out
}

pub fn save(policy: &PolicyParams, design: &DesignMode, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(policy, design))?;
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> CoreError {
    CoreError::Checkpoint(format!("line {line}: {msg}"))
}

fn parse_tensors(text: &str) -> Result<Vec<Tensor>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(bad(1, "missing checkpoint header")),
    }
    let mut tensors = Vec::new();
    loop {
        let Some((n, line)) = lines.next() else { return Err(CoreError::Checkpoint("missing end marker".into())) };
        if line == "end" {
            return Ok(tensors);
        }
        let mut parts = line.split_whitespace();
        if parts.next() != Some("tensor") {
            return Err(bad(n, "expected a tensor header"));
        }
        let name = parts.next().ok_or_else(|| bad(n, "tensor without a name"))?.to_string();
        let shape: Vec<usize> =
            parts.map(|p| p.parse().map_err(|_| bad(n, format!("bad dimension {p:?}")))).collect::<Result<_>>()?;
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        while data.len() < count {
            let (m, row) = lines.next().ok_or_else(|| bad(n, format!("{name} is truncated")))?;
            for v in row.split_whitespace() {
                data.push(v.parse::<f64>().map_err(|_| bad(m, format!("bad value {v:?}")))?);
            }
        }
        if data.len() != count {
            return Err(bad(n, format!("{name} holds {} values, shape needs {count}", data.len())));
        }
        tensors.push(Tensor { name, shape, data });
    }
}

pub fn from_str(text: &str) -> Result<(PolicyParams, DesignMode)> {
    let tensors = parse_tensors(text)?;
    let get = |name: &str| {
        tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CoreError::Checkpoint(format!("tensor {name} missing")))
    };
    let sizes: Vec<usize> = get("policy.sizes")?.data.iter().map(|&v| v as usize).collect();
    if sizes.len() < 2 {
        return Err(CoreError::Checkpoint(format!("unsupported layer sizes {sizes:?}")));
    }
    let mut policy = PolicyParams::zeros(sizes[0], &sizes[1..sizes.len().saturating_sub(1)], 1.0, 0.0);
    if policy.sizes != sizes {
        return Err(CoreError::Checkpoint(format!("unsupported layer sizes {sizes:?}")));
    }
    policy.action_scale = get("policy.action_scale")?.data[0];
    policy.log_std = get("policy.log_std")?.data[0];
    let layers: Vec<_> = policy.layers().collect();
    for (l, (n_out, n_in, w, b)) in layers.into_iter().enumerate() {
        let wt = get(&format!("policy.w{l}"))?;
        let bt = get(&format!("policy.b{l}"))?;
        if wt.shape != [n_out, n_in] || bt.shape != [n_out] {
            return Err(CoreError::Checkpoint(format!("layer {l} has the wrong shape")));
        }
        policy.theta[w..w + n_out * n_in].copy_from_slice(&wt.data);
        policy.theta[b..b + n_out].copy_from_slice(&bt.data);
    }
    policy.validate()?;
    let pair = |name: &str| -> Result<[f64; 2]> {
        let t = get(name)?;
        t.data.as_slice().try_into().map_err(|_| CoreError::Checkpoint(format!("{name} must hold two values")))
    };
    let design = if let Ok(t) = get("design.fixed") {
        if t.data.len() != 2 {
            return Err(CoreError::Checkpoint("design.fixed must hold two values".into()));
        }
        DesignMode::Fixed(DesignPoint::new(t.data[0], t.data[1]))
    } else {
        DesignMode::Learn(DesignDistribution {
            mean: pair("design.mean")?,
            log_std: pair("design.log_std")?,
            lower: pair("design.lower")?,
            upper: pair("design.upper")?,
        })
    };
    Ok((policy, design))
}

pub fn load(path: &Path) -> Result<(PolicyParams, DesignMode)> {
    from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParameters;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PolicyParams::init(9, &[4, 3], 200.0, -2.7, &mut rng);
        let mut dist = DesignDistribution::new(&SystemParameters::default(), -0.3);
        dist.mean = [0.1234567890123, -2.0];
        for design in [DesignMode::Learn(dist), DesignMode::Fixed(DesignPoint::new(55.81, 31.89))] {
            let text = to_string(&p, &design);
            let (q, d) = from_str(&text).unwrap();
            assert_eq!(q, p);
            assert_eq!(d, design);
        }
    }

    #[test]
    fn truncated_file_rejected() {
        let p = PolicyParams::zeros(2, &[2], 1.0, 0.0);
        let text = to_string(&p, &DesignMode::Fixed(DesignPoint::new(1.0, 1.0)));
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(from_str(&cut).is_err());
        assert!(from_str("nonsense").is_err());
    }
}
