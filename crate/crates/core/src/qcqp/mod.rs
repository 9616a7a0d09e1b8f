//! Sparse quadratically-constrained programs with a linear objective.

mod dump;
mod expr;
mod sparse;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

pub use dump::dump;
pub use expr::{CLin, CQuad, LinExpr, QuadExpr};
pub use sparse::Csr;

#[derive(Debug, thiserror::Error)]
pub enum QcqpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    From,
    To,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Re,
    Im,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Seq {
    Zero,
    Pos,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Line,
    Transformer,
    Load,
    Generator,
    Shunt,
}

/// Physical (or auxiliary) quantity a complex variable pair stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Quantity {
    Voltage { bus: String, terminal: String },
    SeriesCurrent { line: String, conductor: usize },
    LineCurrent { line: String, side: Side, conductor: usize },
    TransformerCurrent { transformer: String, side: Side, conductor: usize },
    LoadCurrent { load: String },
    LoadPower { load: String },
    VoltageMagSqr { load: String },
    GenCurrent { generator: String },
    GenPower { generator: String },
    ShuntCurrent { shunt: String, conductor: usize },
    /// Power drawn by a component conductor from its bus terminal.
    Flow { kind: ComponentKind, id: String, side: Side, conductor: usize },
    Sequence { bus: String, seq: Seq },
    /// Product of bus terminal voltages, used to lower higher-order terms.
    VoltageProduct { bus: String, factors: Vec<String> },
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: &Side| match s {
            Side::From => "fr",
            Side::To => "to",
        };
        match self {
            Quantity::Voltage { bus, terminal } => write!(f, "U[{bus}.{terminal}]"),
            Quantity::SeriesCurrent { line, conductor } => write!(f, "Is[{line}#{conductor}]"),
            Quantity::LineCurrent { line, side: s, conductor } => write!(f, "I[{line}.{}#{conductor}]", side(s)),
            Quantity::TransformerCurrent { transformer, side: s, conductor } => {
                write!(f, "It[{transformer}.{}#{conductor}]", side(s))
            }
            Quantity::LoadCurrent { load } => write!(f, "Id[{load}]"),
            Quantity::LoadPower { load } => write!(f, "Sd[{load}]"),
            Quantity::VoltageMagSqr { load } => write!(f, "Umsqr[{load}]"),
            Quantity::GenCurrent { generator } => write!(f, "Ig[{generator}]"),
            Quantity::GenPower { generator } => write!(f, "Sg[{generator}]"),
            Quantity::ShuntCurrent { shunt, conductor } => write!(f, "Ish[{shunt}#{conductor}]"),
            Quantity::Flow { kind, id, side: s, conductor } => {
                write!(f, "S[{kind:?}:{id}.{}#{conductor}]", side(s))
            }
            Quantity::Sequence { bus, seq } => write!(f, "U{seq:?}[{bus}]"),
            Quantity::VoltageProduct { bus, factors } => write!(f, "Uprod[{bus}:{}]", factors.join("*")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarKind {
    VoltageRe,
    VoltageIm,
    CurrentRe,
    CurrentIm,
    PowerP,
    PowerQ,
    Auxiliary,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarKey {
    pub quantity: Quantity,
    pub part: Part,
}

impl VarKey {
    pub fn new(quantity: Quantity, part: Part) -> Self {
        Self { quantity, part }
    }

    pub fn kind(&self) -> VarKind {
        use Quantity::*;
        let re = self.part == Part::Re;
        match self.quantity {
            Voltage { .. } => if re { VarKind::VoltageRe } else { VarKind::VoltageIm },
            SeriesCurrent { .. } | LineCurrent { .. } | TransformerCurrent { .. } | LoadCurrent { .. }
            | GenCurrent { .. } | ShuntCurrent { .. } => {
                if re { VarKind::CurrentRe } else { VarKind::CurrentIm }
            }
            LoadPower { .. } | GenPower { .. } | Flow { .. } => if re { VarKind::PowerP } else { VarKind::PowerQ },
            VoltageMagSqr { .. } | Sequence { .. } | VoltageProduct { .. } => VarKind::Auxiliary,
        }
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.part {
            Part::Re => "re",
            Part::Im => "im",
        };
        write!(f, "{}.{p}", self.quantity)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub key: VarKey,
    pub lower: f64,
    pub upper: f64,
    pub init: f64,
}

impl Variable {
    pub fn kind(&self) -> VarKind {
        self.key.kind()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LineSeries,
    LineFrom,
    LineTo,
    Transformer,
    Load,
    LoadGroup,
    Generator,
    GeneratorBound,
    Shunt,
    Kcl,
    CurrentRating,
    PhaseNeutral,
    PhasePhase,
    NeutralShift,
    Sequence,
    Vuf,
    NegativeSequence,
    Auxiliary,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConstraintTag {
    pub family: Family,
    /// Component or bus id.
    pub id: String,
    pub terminal: Option<String>,
    pub row: usize,
}

impl ConstraintTag {
    pub fn new(family: Family, id: &str, row: usize) -> Self {
        Self { family, id: id.to_string(), terminal: None, row }
    }

    pub fn at(family: Family, bus: &str, terminal: &str, row: usize) -> Self {
        Self { family, id: bus.to_string(), terminal: Some(terminal.to_string()), row }
    }
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fam = serde_json::to_value(self.family).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        match &self.terminal {
            Some(t) => write!(f, "{fam}[{}.{t}]#{}", self.id, self.row),
            None => write!(f, "{fam}[{}]#{}", self.id, self.row),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    /// `expr = 0`
    Eq,
    /// `expr <= 0`
    Le,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticConstraint {
    pub expr: QuadExpr,
    pub sense: Sense,
    pub tag: ConstraintTag,
}

impl QuadraticConstraint {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.expr.eval(x)
    }
}

/// Quadratically-constrained program with linear objective, keyed variables.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSystem {
    pub variables: Vec<Variable>,
    pub constraints: Vec<QuadraticConstraint>,
    pub objective: LinExpr,
    /// Rows removed from the model, kept (in the same variable space) so the
    /// quantity they balanced can be recovered after solving.
    pub dropped: Vec<QuadraticConstraint>,
    /// Variables eliminated as constants.
    pub fixed: BTreeMap<VarKey, f64>,
    index: HashMap<VarKey, usize>,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_cons(&self) -> usize {
        self.constraints.len()
    }

    pub fn n_eq(&self) -> usize {
        self.constraints.iter().filter(|c| c.sense == Sense::Eq).count()
    }

    /// Get or create the variable for `key`.
    pub fn add_var(&mut self, key: VarKey, lower: f64, upper: f64, init: f64) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.variables.len();
        self.index.insert(key.clone(), i);
        self.variables.push(Variable { key, lower, upper, init });
        i
    }

    pub fn free_var(&mut self, key: VarKey, init: f64) -> usize {
        self.add_var(key, f64::NEG_INFINITY, f64::INFINITY, init)
    }

    /// Complex variable pair for a quantity.
    pub fn complex_var(&mut self, q: Quantity, init: num_complex::Complex64) -> CLin {
        let re = self.free_var(VarKey::new(q.clone(), Part::Re), init.re);
        let im = self.free_var(VarKey::new(q, Part::Im), init.im);
        CLin::vars(re, im)
    }

    pub fn index_of(&self, key: &VarKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn has_quantity(&self, q: &Quantity) -> bool {
        self.index.contains_key(&VarKey::new(q.clone(), Part::Re))
    }

    /// Complex expression for a quantity: its variables, or its fixed value.
    pub fn complex_expr(&self, q: &Quantity) -> Option<CLin> {
        let re = VarKey::new(q.clone(), Part::Re);
        let im = VarKey::new(q.clone(), Part::Im);
        let part = |k: &VarKey| {
            self.index_of(k)
                .map(LinExpr::var)
                .or_else(|| self.fixed.get(k).map(|v| LinExpr::constant(*v)))
        };
        Some(CLin { re: part(&re)?, im: part(&im)? })
    }

    /// Value of a variable key at `x`, including eliminated ones.
    pub fn value(&self, key: &VarKey, x: &[f64]) -> Option<f64> {
        self.index_of(key).map(|i| x[i]).or_else(|| self.fixed.get(key).copied())
    }

    pub fn complex_value(&self, q: &Quantity, x: &[f64]) -> Option<num_complex::Complex64> {
        Some(num_complex::Complex64::new(
            self.value(&VarKey::new(q.clone(), Part::Re), x)?,
            self.value(&VarKey::new(q.clone(), Part::Im), x)?,
        ))
    }

    pub fn add_eq(&mut self, expr: QuadExpr, tag: ConstraintTag) {
        self.constraints.push(QuadraticConstraint { expr: expr.normalize(), sense: Sense::Eq, tag });
    }

    pub fn add_le(&mut self, expr: QuadExpr, tag: ConstraintTag) {
        self.constraints.push(QuadraticConstraint { expr: expr.normalize(), sense: Sense::Le, tag });
    }

    /// Complex equality `expr = 0` as two real rows.
    pub fn add_complex_eq(&mut self, expr: CQuad, tag: ConstraintTag) {
        let mut im = tag.clone();
        im.row = tag.row * 2 + 1;
        let mut re = tag;
        re.row *= 2;
        self.add_eq(expr.re, re);
        self.add_eq(expr.im, im);
    }

    pub fn initial_point(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.init).collect()
    }

    fn check(&self, x: &[f64]) -> Result<(), QcqpError> {
        if x.len() != self.n_vars() {
            return Err(QcqpError::DimensionMismatch { expected: self.n_vars(), got: x.len() });
        }
        Ok(())
    }

    /// Raw constraint values `x'Qx + c'x + b`, one per constraint.
    pub fn eval_residuals(&self, x: &[f64]) -> Result<Vec<f64>, QcqpError> {
        self.check(x)?;
        Ok(self.constraints.iter().map(|c| c.eval(x)).collect())
    }

    /// Constraint violations: `|r|` for equalities, `max(r, 0)` for inequalities.
    pub fn eval_violations(&self, x: &[f64]) -> Result<Vec<f64>, QcqpError> {
        self.check(x)?;
        Ok(self
            .constraints
            .iter()
            .map(|c| {
                let r = c.eval(x);
                match c.sense {
                    Sense::Eq => r.abs(),
                    Sense::Le => r.max(0.0),
                }
            })
            .collect())
    }

    /// Largest constraint violation, including variable bounds.
    pub fn max_violation(&self, x: &[f64]) -> Result<f64, QcqpError> {
        let cons = self.eval_violations(x)?.into_iter().fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max);
        Ok(cons.max(bounds))
    }

    pub fn eval_objective(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    pub fn eval_dropped(&self, x: &[f64]) -> Vec<f64> {
        self.dropped.iter().map(|c| c.eval(x)).collect()
    }

    pub fn compile(&self) -> Compiled {
        Compiled::new(self)
    }

    pub fn eval_jacobian(&self, x: &[f64]) -> Result<Csr, QcqpError> {
        self.check(x)?;
        Ok(self.compile().jacobian(x))
    }

    pub fn eval_lagrangian_hessian(&self, lambda: &[f64]) -> Result<Csr, QcqpError> {
        if lambda.len() != self.n_cons() {
            return Err(QcqpError::DimensionMismatch { expected: self.n_cons(), got: lambda.len() });
        }
        Ok(self.compile().hessian(lambda))
    }

    /// Move every constraint matching `pred` to `dropped`.
    pub fn drop_rows(&mut self, pred: impl Fn(&ConstraintTag) -> bool) -> usize {
        let (drop, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.constraints).into_iter().partition(|c| pred(&c.tag));
        let n = drop.len();
        self.constraints = keep;
        self.dropped.extend(drop);
        n
    }

    /// Eliminate variables by fixing them to constants; indices are compacted.
    pub fn substitute(&self, values: &BTreeMap<usize, f64>) -> ConstraintSystem {
        let mut map = vec![usize::MAX; self.n_vars()];
        let mut out = ConstraintSystem { fixed: self.fixed.clone(), ..Default::default() };
        for (i, v) in self.variables.iter().enumerate() {
            match values.get(&i) {
                Some(val) => {
                    out.fixed.insert(v.key.clone(), *val);
                }
                None => {
                    map[i] = out.variables.len();
                    out.index.insert(v.key.clone(), map[i]);
                    out.variables.push(v.clone());
                }
            }
        }
        let fold = |e: &QuadExpr| -> QuadExpr {
            let mut r = QuadExpr { constant: e.constant, ..Default::default() };
            for &(i, c) in &e.lin {
                match values.get(&i) {
                    Some(v) => r.constant += c * v,
                    None => r.lin.push((map[i], c)),
                }
            }
            for &(i, j, c) in &e.quad {
                match (values.get(&i), values.get(&j)) {
                    (Some(a), Some(b)) => r.constant += c * a * b,
                    (Some(a), None) => r.lin.push((map[j], c * a)),
                    (None, Some(b)) => r.lin.push((map[i], c * b)),
                    (None, None) => r.quad.push((map[i].min(map[j]), map[i].max(map[j]), c)),
                }
            }
            r.normalize()
        };
        for c in &self.constraints {
            let expr = fold(&c.expr);
            if expr.lin.is_empty() && expr.quad.is_empty() {
                if expr.constant.abs() > 1e-9 && c.sense == Sense::Eq {
                    log::warn!("constraint {} reduced to nonzero constant {}", c.tag, expr.constant);
                }
                out.dropped.push(QuadraticConstraint { expr, sense: c.sense, tag: c.tag.clone() });
                continue;
            }
            out.constraints.push(QuadraticConstraint { expr, sense: c.sense, tag: c.tag.clone() });
        }
        for c in &self.dropped {
            out.dropped.push(QuadraticConstraint { expr: fold(&c.expr), sense: c.sense, tag: c.tag.clone() });
        }
        let obj = fold(&QuadExpr::from(self.objective.clone()));
        out.objective = LinExpr { terms: obj.lin, constant: obj.constant };
        out
    }
}

/// Evaluation plan with fixed Jacobian and Hessian sparsity.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub n: usize,
    pub m: usize,
    jac_ptr: Vec<usize>,
    jac_idx: Vec<usize>,
    jac_const: Vec<f64>,
    /// `J[pos] += coeff * x[var]`
    jac_quad: Vec<(usize, usize, f64)>,
    hess_ptr: Vec<usize>,
    hess_idx: Vec<usize>,
    /// `H[pos] += coeff * lambda[con]`
    hess_terms: Vec<(usize, usize, f64)>,
}

impl Compiled {
    fn new(sys: &ConstraintSystem) -> Self {
        let n = sys.n_vars();
        let m = sys.n_cons();
        let mut jac_ptr = vec![0];
        let mut jac_idx = Vec::new();
        let mut jac_const = Vec::new();
        let mut jac_quad = Vec::new();
        let mut hess_entries: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        for (k, c) in sys.constraints.iter().enumerate() {
            let mut cols: Vec<usize> = c.expr.lin.iter().map(|t| t.0).collect();
            for &(i, j, _) in &c.expr.quad {
                cols.push(i);
                cols.push(j);
            }
            cols.sort_unstable();
            cols.dedup();
            let base = jac_idx.len();
            let pos = |v: usize| base + cols.binary_search(&v).unwrap();
            jac_const.extend(std::iter::repeat_n(0.0, cols.len()));
            for &(i, coeff) in &c.expr.lin {
                jac_const[pos(i)] += coeff;
            }
            for &(i, j, coeff) in &c.expr.quad {
                if i == j {
                    jac_quad.push((pos(i), i, 2.0 * coeff));
                    hess_entries.entry((i, i)).or_default().push((k, 2.0 * coeff));
                } else {
                    jac_quad.push((pos(i), j, coeff));
                    jac_quad.push((pos(j), i, coeff));
                    hess_entries.entry((j, i)).or_default().push((k, coeff));
                }
            }
            jac_idx.extend(cols);
            jac_ptr.push(jac_idx.len());
        }
        let mut hess_ptr = vec![0; n + 1];
        let mut hess_idx = Vec::with_capacity(hess_entries.len());
        let mut hess_terms = Vec::new();
        for (pos, ((row, col), terms)) in hess_entries.into_iter().enumerate() {
            hess_ptr[row + 1] += 1;
            hess_idx.push(col);
            for (k, coeff) in terms {
                hess_terms.push((pos, k, coeff));
            }
        }
        for r in 0..n {
            hess_ptr[r + 1] += hess_ptr[r];
        }
        Self { n, m, jac_ptr, jac_idx, jac_const, jac_quad, hess_ptr, hess_idx, hess_terms }
    }

    pub fn jacobian(&self, x: &[f64]) -> Csr {
        let mut data = self.jac_const.clone();
        for &(pos, var, coeff) in &self.jac_quad {
            data[pos] += coeff * x[var];
        }
        Csr { nrows: self.m, ncols: self.n, indptr: self.jac_ptr.clone(), indices: self.jac_idx.clone(), data }
    }

    /// Lower triangle of `sum_k lambda_k * 2 Q_k`.
    pub fn hessian(&self, lambda: &[f64]) -> Csr {
        let mut data = vec![0.0; self.hess_idx.len()];
        for &(pos, k, coeff) in &self.hess_terms {
            data[pos] += coeff * lambda[k];
        }
        Csr { nrows: self.n, ncols: self.n, indptr: self.hess_ptr.clone(), indices: self.hess_idx.clone(), data }
    }

    pub fn hessian_nnz(&self) -> usize {
        self.hess_idx.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aux(i: usize) -> VarKey {
        VarKey::new(Quantity::LoadCurrent { load: format!("v{i}") }, Part::Re)
    }

    fn circle() -> ConstraintSystem {
        let mut s = ConstraintSystem::new();
        let a = s.free_var(aux(0), 0.0);
        let b = s.free_var(aux(1), 0.0);
        let e = &LinExpr::var(a).square() + &LinExpr::var(b).square();
        s.add_eq(&e + &LinExpr::constant(-1.0), ConstraintTag::new(Family::Auxiliary, "circle", 0));
        s
    }

    #[test]
    fn empty_system_has_no_residuals() {
        assert!(ConstraintSystem::new().eval_residuals(&[]).unwrap().is_empty());
    }

    #[test]
    fn unit_circle_residuals() {
        let s = circle();
        assert_eq!(s.eval_residuals(&[1.0, 0.0]).unwrap(), vec![0.0]);
        assert_eq!(s.eval_residuals(&[1.0, 1.0]).unwrap(), vec![1.0]);
        assert!(s.eval_residuals(&[1.0]).is_err());
    }

    #[test]
    fn bilinear_jacobian_row() {
        let mut s = ConstraintSystem::new();
        let a = s.free_var(aux(0), 0.0);
        let b = s.free_var(aux(1), 0.0);
        s.add_eq(LinExpr::var(a).mul(&LinExpr::var(b)), ConstraintTag::new(Family::Auxiliary, "xy", 0));
        let j = s.eval_jacobian(&[2.0, 3.0]).unwrap().to_dense();
        assert_eq!((j[(0, 0)], j[(0, 1)]), (3.0, 2.0));
    }

    #[test]
    fn linear_jacobian_is_constant() {
        let mut s = ConstraintSystem::new();
        let a = s.free_var(aux(0), 0.0);
        let b = s.free_var(aux(1), 0.0);
        let e = &LinExpr::var(a).scale(2.0) - &LinExpr::var(b);
        s.add_eq(e.into(), ConstraintTag::new(Family::Auxiliary, "lin", 0));
        let j1 = s.eval_jacobian(&[0.3, -7.0]).unwrap().to_dense();
        let j2 = s.eval_jacobian(&[5.0, 1.0]).unwrap().to_dense();
        assert_eq!(j1, j2);
        assert_eq!((j1[(0, 0)], j1[(0, 1)]), (2.0, -1.0));
    }

    #[test]
    fn hessian_of_single_constraint_is_twice_q() {
        let s = circle();
        let h = s.eval_lagrangian_hessian(&[1.0]).unwrap().to_dense_symmetric();
        assert_eq!(h, nalgebra::DMatrix::from_diagonal_element(2, 2, 2.0));
        let z = s.eval_lagrangian_hessian(&[0.0]).unwrap().to_dense_symmetric();
        assert_eq!(z.amax(), 0.0);
        assert!(s.eval_lagrangian_hessian(&[]).is_err());
    }

    #[test]
    fn substitution_folds_constants() {
        let s = circle();
        let fixed = BTreeMap::from([(1usize, 1.0)]);
        let r = s.substitute(&fixed);
        assert_eq!(r.n_vars(), 1);
        assert_eq!(r.eval_residuals(&[0.5]).unwrap(), vec![0.25]);
        assert_eq!(r.value(&aux(1), &[0.5]), Some(1.0));
    }

    #[test]
    fn scaling_scales_residuals() {
        let s = circle();
        let mut t = s.clone();
        t.constraints[0].expr = t.constraints[0].expr.scale(4.0);
        let x = [0.7, -1.3];
        assert_eq!(t.eval_residuals(&x).unwrap()[0], 4.0 * s.eval_residuals(&x).unwrap()[0]);
    }
}
