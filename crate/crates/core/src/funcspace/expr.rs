//! Symbolic expressions over real coordinates with complex values.
//!
//! Expressions are shared DAGs. Constructors fold constants and trivial
//! identities, derivatives are symbolic, and evaluation runs on a flat tape
//! compiled by the owner and cached there (common subexpressions are evaluated once).

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;

use super::interval::Interval;
use crate::error::{Error, Result};
use crate::group::Scalar;

#[derive(Debug)]
pub enum Node {
    Const(C64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Conj(Expr),
    Exp(Expr),
    /// `ln |re x|`
    LnAbs(Expr),
    /// `|re x|`
    Abs(Expr),
    /// Sign of `re x`; its derivative is taken to be zero.
    Sgn(Expr),
    Powi(Expr, i32),
    /// `|re x|^p`
    PowAbs(Expr, f64),
    /// `n`-th derivative of `u -> exp(-1/(1 - u^2))` on `|u| < 1`, zero elsewhere.
    Bump(Expr, u32),
}

#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn wrap(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(x: f64) -> Expr {
        Expr::wrap(Node::Const(C64::new(x, 0.0)))
    }

    pub fn complex(z: C64) -> Expr {
        Expr::wrap(Node::Const(z))
    }

    pub fn var(i: usize) -> Expr {
        Expr::wrap(Node::Var(i))
    }

    pub fn as_const(&self) -> Option<C64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    fn is_const_eq(&self, x: f64) -> bool {
        self.as_const() == Some(C64::new(x, 0.0))
    }

    pub fn conj(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::complex(c.conj()),
            None => Expr::wrap(Node::Conj(self.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::complex(c.exp()),
            None => Expr::wrap(Node::Exp(self.clone())),
        }
    }

    pub fn ln_abs(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.re.abs().ln()),
            None => Expr::wrap(Node::LnAbs(self.clone())),
        }
    }

    pub fn abs_value(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.re.abs()),
            None => Expr::wrap(Node::Abs(self.clone())),
        }
    }

    pub fn sgn(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(sgn(c.re)),
            None => Expr::wrap(Node::Sgn(self.clone())),
        }
    }

    pub fn powi(&self, n: i32) -> Expr {
        match n {
            0 => return Expr::constant(1.0),
            1 => return self.clone(),
            _ => {}
        }
        match self.as_const() {
            Some(c) => Expr::complex(c.powi(n)),
            None => Expr::wrap(Node::Powi(self.clone(), n)),
        }
    }

    pub fn pow_abs(&self, p: f64) -> Expr {
        if p == 0.0 {
            return Expr::constant(1.0);
        }
        match self.as_const() {
            Some(c) => Expr::constant(c.re.abs().powf(p)),
            None => Expr::wrap(Node::PowAbs(self.clone(), p)),
        }
    }

    /// Standard bump `exp(-1/(1 - u^2))` of this expression.
    pub fn bump(&self) -> Expr {
        self.bump_derivative(0)
    }

    pub fn bump_derivative(&self, n: u32) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(bump_deriv(n, c.re)),
            None => Expr::wrap(Node::Bump(self.clone(), n)),
        }
    }

    /// Symbolic partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(var, &mut memo)
    }

    fn diff_memo(&self, var: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.key()) {
            return d.clone();
        }
        let zero = || Expr::constant(0.0);
        let d = match self.node() {
            Node::Const(_) => zero(),
            Node::Var(j) => Expr::constant(if *j == var { 1.0 } else { 0.0 }),
            Node::Add(a, b) => a.diff_memo(var, memo) + b.diff_memo(var, memo),
            Node::Sub(a, b) => a.diff_memo(var, memo) - b.diff_memo(var, memo),
            Node::Mul(a, b) => {
                let (da, db) = (a.diff_memo(var, memo), b.diff_memo(var, memo));
                da * b.clone() + a.clone() * db
            }
            Node::Div(a, b) => {
                let (da, db) = (a.diff_memo(var, memo), b.diff_memo(var, memo));
                da / b.clone() - a.clone() * db / b.powi(2)
            }
            Node::Neg(a) => -a.diff_memo(var, memo),
            Node::Conj(a) => a.diff_memo(var, memo).conj(),
            Node::Exp(a) => self.clone() * a.diff_memo(var, memo),
            Node::LnAbs(a) => a.diff_memo(var, memo) / a.clone(),
            Node::Abs(a) => a.sgn() * a.diff_memo(var, memo),
            Node::Sgn(_) => zero(),
            Node::Powi(a, n) => Expr::constant(*n as f64) * a.powi(n - 1) * a.diff_memo(var, memo),
            Node::PowAbs(a, p) => Expr::constant(*p) * a.pow_abs(p - 1.0) * a.sgn() * a.diff_memo(var, memo),
            Node::Bump(a, n) => a.bump_derivative(n + 1) * a.diff_memo(var, memo),
        };
        memo.insert(self.key(), d.clone());
        d
    }

    /// Replace coordinate `i` by `vars[i]` throughout.
    pub fn substitute(&self, vars: &[Expr]) -> Expr {
        let mut memo = HashMap::new();
        self.subst_memo(vars, &mut memo)
    }

    fn subst_memo(&self, vars: &[Expr], memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.key()) {
            return e.clone();
        }
        let mut s = |e: &Expr| e.subst_memo(vars, memo);
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(j) => vars.get(*j).cloned().unwrap_or_else(|| self.clone()),
            Node::Add(a, b) => s(a) + s(b),
            Node::Sub(a, b) => s(a) - s(b),
            Node::Mul(a, b) => s(a) * s(b),
            Node::Div(a, b) => s(a) / s(b),
            Node::Neg(a) => -s(a),
            Node::Conj(a) => s(a).conj(),
            Node::Exp(a) => s(a).exp(),
            Node::LnAbs(a) => s(a).ln_abs(),
            Node::Abs(a) => s(a).abs_value(),
            Node::Sgn(a) => s(a).sgn(),
            Node::Powi(a, n) => s(a).powi(*n),
            Node::PowAbs(a, p) => s(a).pow_abs(*p),
            Node::Bump(a, n) => s(a).bump_derivative(*n),
        };
        memo.insert(self.key(), out.clone());
        out
    }

    /// Largest coordinate index used, plus one.
    pub fn arity_hint(&self) -> usize {
        self.compile().n_vars
    }

    pub fn is_real(&self) -> bool {
        self.compile().real
    }

    /// Interval enclosure of the (real part of the) expression over a box.
    pub fn eval_interval(&self, x: &[Interval]) -> Result<Interval> {
        let mut memo = HashMap::new();
        self.interval_memo(x, &mut memo)
    }

    fn interval_memo(&self, x: &[Interval], memo: &mut HashMap<usize, Interval>) -> Result<Interval> {
        if let Some(i) = memo.get(&self.key()) {
            return Ok(*i);
        }
        let mut r = |e: &Expr| e.interval_memo(x, memo);
        let out = match self.node() {
            Node::Const(c) => {
                if c.im != 0.0 {
                    return Err(Error::InvalidArgument("interval evaluation of a complex constant".into()));
                }
                Interval::point(c.re)
            }
            Node::Var(j) => *x.get(*j).ok_or_else(|| Error::InvalidArgument(format!("coordinate {j} missing from box")))?,
            Node::Add(a, b) => r(a)?.add(r(b)?),
            Node::Sub(a, b) => r(a)?.sub(r(b)?),
            Node::Mul(a, b) => r(a)?.mul(r(b)?),
            Node::Div(a, b) => r(a)?.div(r(b)?)?,
            Node::Neg(a) => r(a)?.neg(),
            Node::Conj(a) => r(a)?,
            Node::Exp(a) => r(a)?.exp(),
            Node::LnAbs(a) => r(a)?.ln_abs()?,
            Node::Abs(a) => r(a)?.abs(),
            Node::Sgn(a) => r(a)?.sgn(),
            Node::Powi(a, n) => r(a)?.powi(*n)?,
            Node::PowAbs(a, p) => r(a)?.pow_abs(*p)?,
            Node::Bump(_, 0) => Interval::new(0.0, (-1.0f64).exp()),
            Node::Bump(..) => {
                return Err(Error::InvalidArgument("no interval bound for bump derivatives".into()));
            }
        };
        memo.insert(self.key(), out);
        Ok(out)
    }

    /// Compiled tape, built on first use and cached per node.
    pub fn compile(&self) -> Tape {
        Tape::build(self)
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) if c.im == 0.0 => write!(f, "{}", c.re),
            Node::Const(c) => write!(f, "({}{:+}i)", c.re, c.im),
            Node::Var(j) => write!(f, "x{j}"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "{a}*{b}"),
            Node::Div(a, b) => write!(f, "{a}/{b}"),
            Node::Neg(a) => write!(f, "-{a}"),
            Node::Conj(a) => write!(f, "conj({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::LnAbs(a) => write!(f, "ln|{a}|"),
            Node::Abs(a) => write!(f, "|{a}|"),
            Node::Sgn(a) => write!(f, "sgn({a})"),
            Node::Powi(a, n) => write!(f, "{a}^{n}"),
            Node::PowAbs(a, p) => write!(f, "|{a}|^{p}"),
            Node::Bump(a, 0) => write!(f, "bump({a})"),
            Node::Bump(a, n) => write!(f, "bump^({n})({a})"),
        }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::complex(a + b),
            (Some(a), None) if a == C64::new(0.0, 0.0) => rhs,
            (None, Some(b)) if b == C64::new(0.0, 0.0) => self,
            _ => Expr::wrap(Node::Add(self, rhs)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::complex(a - b),
            (Some(a), None) if a == C64::new(0.0, 0.0) => -rhs,
            (None, Some(b)) if b == C64::new(0.0, 0.0) => self,
            _ => Expr::wrap(Node::Sub(self, rhs)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        if self.is_const_eq(0.0) || rhs.is_const_eq(0.0) {
            return Expr::constant(0.0);
        }
        if self.is_const_eq(1.0) {
            return rhs;
        }
        if rhs.is_const_eq(1.0) {
            return self;
        }
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::complex(a * b),
            _ => Expr::wrap(Node::Mul(self, rhs)),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        if self.is_const_eq(0.0) {
            return Expr::constant(0.0);
        }
        if rhs.is_const_eq(1.0) {
            return self;
        }
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::complex(a / b),
            _ => Expr::wrap(Node::Div(self, rhs)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::complex(-c),
            Node::Neg(a) => a.clone(),
            _ => Expr::wrap(Node::Neg(self)),
        }
    }
}

macro_rules! ref_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr { $tr::$m(self.clone(), rhs.clone()) }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr { $tr::$m(self, Expr::constant(rhs)) }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr { $tr::$m(Expr::constant(self), rhs) }
        }
    )*};
}
ref_ops!(Add add, Sub sub, Mul mul, Div div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

impl Scalar for Expr {
    fn cst(x: f64) -> Self {
        Expr::constant(x)
    }
    fn abs(&self) -> Self {
        self.abs_value()
    }
    fn sqrt(&self) -> Self {
        self.pow_abs(0.5)
    }
    fn near_zero(&self, eps: f64) -> bool {
        self.as_const().is_some_and(|c| c.norm() <= eps)
    }
}

/// Coefficients (ascending) of the polynomials `P_n` with
/// `bump^(n)(u) = P_n(u) (1 - u^2)^(-2n) bump(u)`.
fn bump_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out = vec![vec![1.0]];
        for n in 0..12usize {
            let p = &out[n];
            let deg = p.len() + 4;
            let mut next = vec![0.0; deg];
            // P' (1 - u^2)^2
            for (k, &c) in p.iter().enumerate().skip(1) {
                let d = c * k as f64;
                next[k - 1] += d;
                next[k + 1] -= 2.0 * d;
                next[k + 3] += d;
            }
            // 4 n u (1 - u^2) P - 2 u P
            for (k, &c) in p.iter().enumerate() {
                next[k + 1] += (4.0 * n as f64 - 2.0) * c;
                next[k + 3] -= 4.0 * n as f64 * c;
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            out.push(next);
        }
        out
    })
}

/// `n`-th derivative of the standard bump at `u`.
pub fn bump_deriv(n: u32, u: f64) -> f64 {
    if !(u.abs() < 1.0) {
        return 0.0;
    }
    let w = 1.0 - u * u;
    let t = 1.0 / w;
    let base = (-t).exp();
    if n == 0 {
        return base;
    }
    let polys = bump_polys();
    let p = polys.get(n as usize).unwrap_or_else(|| panic!("bump derivatives are tabulated up to order {}", polys.len() - 1));
    let poly = p.iter().rev().fold(0.0, |acc, &c| acc * u + c);
    poly * t.powi(2 * n as i32) * base
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(C64),
    Var(usize),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Conj(u32),
    Exp(u32),
    LnAbs(u32),
    Abs(u32),
    Sgn(u32),
    Powi(u32, i32),
    PowAbs(u32, f64),
    Bump(u32, u32),
}

/// Flat evaluation program for an expression.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Arc<Vec<Op>>,
    real: bool,
    n_vars: usize,
}

trait Value: Copy {
    fn from_c64(c: C64) -> Self;
    fn from_f64(x: f64) -> Self;
    fn re(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn conj(self) -> Self;
    fn exp(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Value for f64 {
    fn from_c64(c: C64) -> Self {
        c.re
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn conj(self) -> Self {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

impl Value for C64 {
    fn from_c64(c: C64) -> Self {
        c
    }
    fn from_f64(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn exp(self) -> Self {
        C64::exp(self)
    }
    fn powi(self, n: i32) -> Self {
        C64::powi(&self, n)
    }
}

thread_local! {
    static REAL_BUF: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
    static CPLX_BUF: RefCell<Vec<C64>> = const { RefCell::new(Vec::new()) };
}

impl Tape {
    fn build(e: &Expr) -> Tape {
        let mut index: HashMap<usize, u32> = HashMap::new();
        let mut ops: Vec<Op> = Vec::new();
        let mut real = true;
        let mut n_vars = 0usize;
        // Iterative post-order traversal to avoid deep recursion.
        let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
        while let Some((cur, expanded)) = stack.pop() {
            if index.contains_key(&cur.key()) {
                continue;
            }
            let children: Vec<&Expr> = match cur.node() {
                Node::Const(_) | Node::Var(_) => vec![],
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => vec![a, b],
                Node::Neg(a)
                | Node::Conj(a)
                | Node::Exp(a)
                | Node::LnAbs(a)
                | Node::Abs(a)
                | Node::Sgn(a)
                | Node::Powi(a, _)
                | Node::PowAbs(a, _)
                | Node::Bump(a, _) => vec![a],
            };
            if !expanded {
                stack.push((cur.clone(), true));
                for c in children.into_iter().rev() {
                    if !index.contains_key(&c.key()) {
                        stack.push((c.clone(), false));
                    }
                }
                continue;
            }
            let ix = |x: &Expr| index[&x.key()];
            let op = match cur.node() {
                Node::Const(c) => {
                    if c.im != 0.0 {
                        real = false;
                    }
                    Op::Const(*c)
                }
                Node::Var(j) => {
                    n_vars = n_vars.max(j + 1);
                    Op::Var(*j)
                }
                Node::Add(a, b) => Op::Add(ix(a), ix(b)),
                Node::Sub(a, b) => Op::Sub(ix(a), ix(b)),
                Node::Mul(a, b) => Op::Mul(ix(a), ix(b)),
                Node::Div(a, b) => Op::Div(ix(a), ix(b)),
                Node::Neg(a) => Op::Neg(ix(a)),
                Node::Conj(a) => Op::Conj(ix(a)),
                Node::Exp(a) => Op::Exp(ix(a)),
                Node::LnAbs(a) => Op::LnAbs(ix(a)),
                Node::Abs(a) => Op::Abs(ix(a)),
                Node::Sgn(a) => Op::Sgn(ix(a)),
                Node::Powi(a, n) => Op::Powi(ix(a), *n),
                Node::PowAbs(a, p) => Op::PowAbs(ix(a), *p),
                Node::Bump(a, n) => Op::Bump(ix(a), *n),
            };
            index.insert(cur.key(), ops.len() as u32);
            ops.push(op);
        }
        Tape { ops: Arc::new(ops), real, n_vars }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn run<V: Value>(&self, x: &[f64], buf: &mut Vec<V>) -> V {
        buf.clear();
        for op in self.ops.iter() {
            let g = |i: u32| buf[i as usize];
            let v = match *op {
                Op::Const(c) => V::from_c64(c),
                Op::Var(j) => V::from_f64(x[j]),
                Op::Add(a, b) => g(a).add(g(b)),
                Op::Sub(a, b) => g(a).sub(g(b)),
                Op::Mul(a, b) => g(a).mul(g(b)),
                Op::Div(a, b) => g(a).div(g(b)),
                Op::Neg(a) => g(a).neg(),
                Op::Conj(a) => g(a).conj(),
                Op::Exp(a) => g(a).exp(),
                Op::LnAbs(a) => V::from_f64(g(a).re().abs().ln()),
                Op::Abs(a) => V::from_f64(g(a).re().abs()),
                Op::Sgn(a) => V::from_f64(sgn(g(a).re())),
                Op::Powi(a, n) => g(a).powi(n),
                Op::PowAbs(a, p) => V::from_f64(g(a).re().abs().powf(p)),
                Op::Bump(a, n) => V::from_f64(bump_deriv(n, g(a).re())),
            };
            buf.push(v);
        }
        *buf.last().expect("tape is never empty")
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        debug_assert!(x.len() >= self.n_vars);
        if self.real {
            C64::new(self.eval_real(x), 0.0)
        } else {
            CPLX_BUF.with(|b| self.run::<C64>(x, &mut b.borrow_mut()))
        }
    }

    /// Real part only, evaluated in real arithmetic when possible.
    pub fn eval_real(&self, x: &[f64]) -> f64 {
        if self.real {
            REAL_BUF.with(|b| self.run::<f64>(x, &mut b.borrow_mut()))
        } else {
            self.eval(x).re
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0)
    }
    fn y() -> Expr {
        Expr::var(1)
    }

    #[test]
    fn folding() {
        let e = x() * 0.0 + y() * 1.0;
        assert!(matches!(e.node(), Node::Var(1)));
        assert_eq!((Expr::constant(2.0) * 3.0).as_const().unwrap().re, 6.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = (x() * y()).exp() / (1.0 + x().powi(2)) + (x() - 0.3 * y()).bump() * y().pow_abs(1.5);
        let p = [0.2, 0.7];
        for var in 0..2 {
            let d = f.diff(var).compile().eval_real(&p);
            let h = 1e-5;
            let mut pp = p;
            let mut pm = p;
            pp[var] += h;
            pm[var] -= h;
            let fd = (f.compile().eval_real(&pp) - f.compile().eval_real(&pm)) / (2.0 * h);
            assert!((d - fd).abs() < 1e-7, "var {var}: {d} vs {fd}");
        }
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        for n in 0..5 {
            for &u in &[-0.7, -0.2, 0.0, 0.45, 0.9] {
                let h = 1e-5;
                let fd = (bump_deriv(n, u + h) - bump_deriv(n, u - h)) / (2.0 * h);
                let exact = bump_deriv(n + 1, u);
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "n={n} u={u}: {fd} vs {exact}");
            }
        }
        assert_eq!(bump_deriv(3, 1.0), 0.0);
    }

    #[test]
    fn substitution_and_sharing() {
        let f = x() * x() + y();
        let g = f.substitute(&[y() + 1.0, x()]);
        assert_eq!(g.compile().eval_real(&[2.0, 3.0]), 16.0 + 2.0);
    }

    #[test]
    fn complex_evaluation() {
        let f = Expr::complex(C64::new(0.0, 1.0)) * x();
        assert!(!f.is_real());
        assert_eq!(f.compile().eval(&[2.0]), C64::new(0.0, 2.0));
        assert_eq!(f.conj().compile().eval(&[2.0]), C64::new(0.0, -2.0));
    }

    #[test]
    fn interval_enclosure() {
        let f = x() / (1.0 + y());
        let iv = f.eval_interval(&[Interval::new(1.0, 2.0), Interval::new(0.0, 1.0)]).unwrap();
        assert!(iv.lo <= 0.5 && iv.hi >= 2.0);
        assert!(f.eval_interval(&[Interval::new(1.0, 2.0), Interval::new(-2.0, 0.0)]).is_err());
    }
}
