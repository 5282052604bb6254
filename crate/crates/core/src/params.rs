//! System constants, design variables and the cost arithmetic shared by both optimizers.

use crate::config::KeyValues;
use crate::error::{CoreError, Result};

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Prices, bounds, efficiency, lifetimes and cost coefficients of the PV, battery and grid system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParameters {
    /// Import price, €/kWh.
    pub c_imp: f64,
    /// Export price, €/kWh. Negative means exporting costs money.
    pub c_exp: f64,
    pub p_grid_max: f64,
    pub p_nom_min: f64,
    pub p_nom_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub eta_b: f64,
    pub l_pv: f64,
    pub l_b: f64,
    pub cx_pv_fix: f64,
    pub ox_pv_fix: f64,
    pub cx_b_fix: f64,
    pub ox_b_fix: f64,
    pub cx_pv_var: f64,
    pub ox_pv_var: f64,
    pub cx_b_var: f64,
    pub ox_b_var: f64,
    pub r: f64,
    pub dt: f64,
}

impl Default for SystemParameters {
    fn default() -> Self {
        Self {
            c_imp: 1.0,
            c_exp: -0.05,
            p_grid_max: 10_000.0,
            p_nom_min: 0.0,
            p_nom_max: 200.0,
            b_min: 0.0,
            b_max: 200.0,
            eta_b: 0.9,
            l_pv: 20.0,
            l_b: 30.0,
            cx_pv_fix: 50.0,
            ox_pv_fix: 3.0,
            cx_b_fix: 30.0,
            ox_b_fix: 5.0,
            cx_pv_var: 200.0,
            ox_pv_var: 10.0,
            cx_b_var: 110.0,
            ox_b_var: 6.0,
            r: 0.05,
            dt: 1.0,
        }
    }
}

macro_rules! param_fields {
    ($m:ident) => {
        $m!(c_imp, c_exp, p_grid_max, p_nom_min, p_nom_max, b_min, b_max, eta_b, l_pv, l_b, cx_pv_fix, ox_pv_fix,
            cx_b_fix, ox_b_fix, cx_pv_var, ox_pv_var, cx_b_var, ox_b_var, r, dt)
    };
}

impl SystemParameters {
    pub const KEYS: &'static [&'static str] = {
        macro_rules! names {
            ($($f:ident),*) => { &[$(stringify!($f)),*] };
        }
        param_fields!(names)
    };

    /// Reads every known key from `kv`; keys that are absent keep their default value.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        Self::default().with_key_values(kv)
    }

    /// Copy of `self` with every key present in `kv` overridden.
    pub fn with_key_values(&self, kv: &KeyValues) -> Result<Self> {
        let mut p = self.clone();
        macro_rules! read {
            ($($f:ident),*) => { $( if let Some(v) = kv.get_f64(stringify!($f))? { p.$f = v; } )* };
        }
        param_fields!(read);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CoreError::InvalidInput(msg.to_string()));
        macro_rules! finite {
            ($($f:ident),*) => { $( if !self.$f.is_finite() { return bad(concat!(stringify!($f), " must be finite")); } )* };
        }
        param_fields!(finite);
        if !(self.eta_b > 0.0 && self.eta_b <= 1.0) {
            return bad("eta_b must lie in (0, 1]");
        }
        if self.dt <= 0.0 {
            return bad("dt must be positive");
        }
        if self.l_pv < 1.0 || self.l_b < 1.0 {
            return bad("lifetimes must be at least one year");
        }
        if self.p_nom_min > self.p_nom_max || self.b_min > self.b_max {
            return bad("design bounds are inverted");
        }
        if self.p_nom_min < 0.0 || self.b_min < 0.0 {
            return bad("design bounds must be non-negative");
        }
        if self.p_grid_max <= 0.0 {
            return bad("p_grid_max must be positive");
        }
        if self.r < 0.0 {
            return bad("discount rate must be non-negative");
        }
        Ok(())
    }
}

/// PV nominal power (kWp) and battery capacity (kWh).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    pub p_nom: f64,
    pub b: f64,
}

impl DesignPoint {
    pub fn new(p_nom: f64, b: f64) -> Self {
        Self { p_nom, b }
    }

    pub fn validate(&self, params: &SystemParameters) -> Result<()> {
        let tol = 1e-9;
        if !(self.p_nom >= params.p_nom_min - tol && self.p_nom <= params.p_nom_max + tol) {
            return Err(CoreError::InvalidInput(format!(
                "p_nom {} outside [{}, {}]",
                self.p_nom, params.p_nom_min, params.p_nom_max
            )));
        }
        if !(self.b >= params.b_min - tol && self.b <= params.b_max + tol) {
            return Err(CoreError::InvalidInput(format!("b {} outside [{}, {}]", self.b, params.b_min, params.b_max)));
        }
        Ok(())
    }
}

/// Horizon-scaled economics of one operated design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub capex_amortized: f64,
    pub opex_scaled: f64,
    pub grid_cost: f64,
    pub totex: f64,
    pub income: f64,
}

impl CostBreakdown {
    pub fn new(design: DesignPoint, params: &SystemParameters, t_hours: f64, grid_cost: f64) -> Self {
        let (capex_amortized, opex_scaled) = fixed_parts(design, params, t_hours);
        Self {
            capex_amortized,
            opex_scaled,
            grid_cost,
            totex: capex_amortized + opex_scaled + grid_cost,
            income: -grid_cost,
        }
    }

    pub fn fixed(&self) -> f64 {
        self.capex_amortized + self.opex_scaled
    }
}

/// Capital recovery factor scaled to a horizon of `t` hours.
///
/// `r = 0` falls back to straight-line recovery `1/l`.
pub fn annuity_factor(r: f64, l: f64, t: f64) -> Result<f64> {
    if r < 0.0 || t < 0.0 || l < 1.0 || !(r.is_finite() && l.is_finite() && t.is_finite()) {
        return Err(CoreError::InvalidInput(format!("annuity factor needs r >= 0, l >= 1, t >= 0; got ({r}, {l}, {t})")));
    }
    let per_year = if r == 0.0 {
        1.0 / l
    } else {
        let g = (1.0 + r).powf(l);
        r * g / (g - 1.0)
    };
    Ok(per_year * t / HOURS_PER_YEAR)
}

/// `(capex, annual opex)` of a PV installation of `p_nom` kWp.
pub fn pv_costs(p_nom: f64, params: &SystemParameters) -> (f64, f64) {
    (params.cx_pv_fix + params.cx_pv_var * p_nom, params.ox_pv_fix + params.ox_pv_var * p_nom)
}

/// `(capex, annual opex)` of a battery of `b` kWh.
pub fn battery_costs(b: f64, params: &SystemParameters) -> (f64, f64) {
    (params.cx_b_fix + params.cx_b_var * b, params.ox_b_fix + params.ox_b_var * b)
}

/// Cost of one grid step. Exporting at a negative price adds to the cost.
pub fn grid_step_cost(p_imp: f64, p_exp: f64, params: &SystemParameters) -> Result<f64> {
    for (name, v) in [("p_imp", p_imp), ("p_exp", p_exp)] {
        if !(0.0..=params.p_grid_max).contains(&v) {
            return Err(CoreError::InvalidInput(format!("{name} = {v} outside [0, {}]", params.p_grid_max)));
        }
    }
    Ok(p_imp * params.c_imp * params.dt - p_exp * params.c_exp * params.dt)
}

fn fixed_parts(design: DesignPoint, params: &SystemParameters, t: f64) -> (f64, f64) {
    // Parameters are validated on construction, so the factors cannot fail for t >= 0.
    let r_pv = annuity_factor(params.r, params.l_pv, t.max(0.0)).unwrap_or(f64::NAN);
    let r_b = annuity_factor(params.r, params.l_b, t.max(0.0)).unwrap_or(f64::NAN);
    let (cx_pv, ox_pv) = pv_costs(design.p_nom, params);
    let (cx_b, ox_b) = battery_costs(design.b, params);
    (cx_pv * r_pv + cx_b * r_b, (ox_pv + ox_b) * (t / HOURS_PER_YEAR))
}

/// Amortized capex plus horizon-scaled opex of `design` over `t` hours.
pub fn fixed_cost_per_horizon(design: DesignPoint, params: &SystemParameters, t: f64) -> f64 {
    let (capex, opex) = fixed_parts(design, params, t);
    capex + opex
}

/// Negated grid cost of an import/export schedule.
pub fn income(imports: &[f64], exports: &[f64], params: &SystemParameters) -> Result<f64> {
    if imports.len() != exports.len() {
        return Err(CoreError::InvalidInput(format!(
            "import series has {} steps, export series {}",
            imports.len(),
            exports.len()
        )));
    }
    Ok(imports.iter().zip(exports).map(|(i, e)| (-i * params.c_imp + e * params.c_exp) * params.dt).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn defaults_validate() {
        SystemParameters::default().validate().unwrap();
        assert_eq!(SystemParameters::KEYS.len(), 20);
    }

    #[test]
    fn annuity_examples() {
        assert_abs_diff_eq!(annuity_factor(0.05, 20.0, 8760.0).unwrap(), 0.0802426, epsilon = 1e-6);
        assert_abs_diff_eq!(annuity_factor(0.05, 30.0, 8760.0).unwrap(), 0.0650514, epsilon = 1e-6);
        assert_eq!(annuity_factor(0.05, 20.0, 0.0).unwrap(), 0.0);
        assert_eq!(annuity_factor(0.0, 20.0, 8760.0).unwrap(), 0.05);
        assert!(annuity_factor(-0.01, 20.0, 8760.0).is_err());
        assert!(annuity_factor(0.05, 20.0, -1.0).is_err());
    }

    #[test]
    fn component_costs() {
        let p = SystemParameters::default();
        assert_eq!(pv_costs(0.0, &p), (50.0, 3.0));
        assert_eq!(pv_costs(200.0, &p), (40050.0, 2003.0));
        let (c, o) = pv_costs(63.65, &p);
        assert_abs_diff_eq!(c, 12780.0, epsilon = 1e-9);
        assert_abs_diff_eq!(o, 639.5, epsilon = 1e-9);
        assert_eq!(battery_costs(0.0, &p), (30.0, 5.0));
        assert_eq!(battery_costs(200.0, &p), (22030.0, 1205.0));
        let (c, o) = battery_costs(64.9, &p);
        assert_abs_diff_eq!(c, 7169.0, epsilon = 1e-9);
        assert_abs_diff_eq!(o, 394.4, epsilon = 1e-9);
    }

    #[test]
    fn grid_and_income() {
        let p = SystemParameters::default();
        assert_eq!(grid_step_cost(10.0, 0.0, &p).unwrap(), 10.0);
        assert_eq!(grid_step_cost(0.0, 0.0, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(grid_step_cost(0.0, 10.0, &p).unwrap(), 0.5, epsilon = 1e-12);
        assert!(grid_step_cost(-1.0, 0.0, &p).is_err());
        assert!(grid_step_cost(0.0, 10_001.0, &p).is_err());
        assert_eq!(income(&[10.0], &[0.0], &p).unwrap(), -10.0);
        assert_eq!(income(&[0.0, 0.0], &[0.0, 0.0], &p).unwrap(), 0.0);
        assert_abs_diff_eq!(income(&[0.0], &[10.0], &p).unwrap(), -0.5, epsilon = 1e-12);
        assert!(income(&[1.0], &[], &p).is_err());
    }

    #[test]
    fn fixed_cost_examples() {
        let p = SystemParameters::default();
        let zero = DesignPoint::new(0.0, 0.0);
        assert_abs_diff_eq!(fixed_cost_per_horizon(zero, &p, 8760.0), 13.96, epsilon = 0.01);
        assert_eq!(fixed_cost_per_horizon(zero, &p, 0.0), 0.0);
        let year_preset = DesignPoint::new(63.65, 64.9);
        assert_abs_diff_eq!(fixed_cost_per_horizon(year_preset, &p, 8760.0), 2525.9, epsilon = 0.5);
    }

    #[test]
    fn config_overrides_and_defaults() {
        let kv = KeyValues::parse("c_imp = 0.3\neta_b=1\n").unwrap();
        let p = SystemParameters::from_key_values(&kv).unwrap();
        assert_eq!(p.c_imp, 0.3);
        assert_eq!(p.eta_b, 1.0);
        assert_eq!(p.c_exp, -0.05);
        let kv = KeyValues::parse("eta_b = 1.5\n").unwrap();
        assert!(SystemParameters::from_key_values(&kv).is_err());
    }
}
