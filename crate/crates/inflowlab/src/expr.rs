//! Small symbolic expression language over `t, x, y, z`.
//!
//! Grammar: numbers, `pi`, named constants, `+ - * /`, unary minus and the
//! functions `sin`, `cos`, `exp`. Expressions can be differentiated
//! symbolically and compiled into a shared straight-line program for fast
//! repeated evaluation.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Independent variables of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
    Y,
    Z,
}

impl Var {
    pub const SPACE: [Var; 3] = [Var::X, Var::Y, Var::Z];

    fn slot(self) -> usize {
        match self {
            Var::T => 0,
            Var::X => 1,
            Var::Y => 2,
            Var::Z => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
        }
    }
}

#[derive(Debug)]
enum Node {
    Const(f64),
    Var(Var),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn node(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn constant(c: f64) -> Self {
        Self::node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var(v: Var) -> Self {
        Self::node(Node::Var(v))
    }

    pub fn t() -> Self {
        Self::var(Var::T)
    }

    pub fn x() -> Self {
        Self::var(Var::X)
    }

    pub fn y() -> Self {
        Self::var(Var::Y)
    }

    pub fn z() -> Self {
        Self::var(Var::Z)
    }

    /// Value if the expression is a literal constant.
    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn add(&self, o: &Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(0.0), _) => o.clone(),
            (_, Some(0.0)) => self.clone(),
            _ => Self::node(Node::Add(self.clone(), o.clone())),
        }
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a - b),
            (Some(0.0), _) => o.neg(),
            (_, Some(0.0)) => self.clone(),
            _ => Self::node(Node::Sub(self.clone(), o.clone())),
        }
    }

    pub fn mul(&self, o: &Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            (Some(0.0), _) => Expr::zero(),
            (_, Some(0.0)) => Expr::zero(),
            (Some(1.0), _) => o.clone(),
            (_, Some(1.0)) => self.clone(),
            (Some(-1.0), _) => o.neg(),
            (_, Some(-1.0)) => self.neg(),
            _ => Self::node(Node::Mul(self.clone(), o.clone())),
        }
    }

    pub fn div(&self, o: &Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => Expr::constant(a / b),
            (Some(0.0), _) => Expr::zero(),
            (_, Some(1.0)) => self.clone(),
            _ => Self::node(Node::Div(self.clone(), o.clone())),
        }
    }

    pub fn neg(&self) -> Expr {
        match &*self.0 {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Self::node(Node::Neg(self.clone())),
        }
    }

    pub fn sin(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.sin()),
            None => Self::node(Node::Sin(self.clone())),
        }
    }

    pub fn cos(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.cos()),
            None => Self::node(Node::Cos(self.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.exp()),
            None => Self::node(Node::Exp(self.clone())),
        }
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::constant(c).mul(self)
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Expr {
        match &*self.0 {
            Node::Const(_) => Expr::zero(),
            Node::Var(w) => {
                if *w == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => a.diff(v).add(&b.diff(v)),
            Node::Sub(a, b) => a.diff(v).sub(&b.diff(v)),
            Node::Mul(a, b) => a.diff(v).mul(b).add(&a.mul(&b.diff(v))),
            Node::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                if db.is_zero() {
                    da.div(b)
                } else {
                    da.mul(b).sub(&a.mul(&db)).div(&b.mul(b))
                }
            }
            Node::Neg(a) => a.diff(v).neg(),
            Node::Sin(a) => a.cos().mul(&a.diff(v)),
            Node::Cos(a) => a.sin().neg().mul(&a.diff(v)),
            Node::Exp(a) => self.mul(&a.diff(v)),
        }
    }

    /// Replaces variable `v` by `e` everywhere.
    pub fn substitute(&self, v: Var, e: &Expr) -> Expr {
        match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Var(w) => {
                if *w == v {
                    e.clone()
                } else {
                    self.clone()
                }
            }
            Node::Add(a, b) => a.substitute(v, e).add(&b.substitute(v, e)),
            Node::Sub(a, b) => a.substitute(v, e).sub(&b.substitute(v, e)),
            Node::Mul(a, b) => a.substitute(v, e).mul(&b.substitute(v, e)),
            Node::Div(a, b) => a.substitute(v, e).div(&b.substitute(v, e)),
            Node::Neg(a) => a.substitute(v, e).neg(),
            Node::Sin(a) => a.substitute(v, e).sin(),
            Node::Cos(a) => a.substitute(v, e).cos(),
            Node::Exp(a) => a.substitute(v, e).exp(),
        }
    }

    /// Tree-walking evaluation at `(t, x, y, z)`.
    pub fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> f64 {
        self.eval_slots(&[t, x, y, z])
    }

    fn eval_slots(&self, s: &[f64; 4]) -> f64 {
        match &*self.0 {
            Node::Const(c) => *c,
            Node::Var(v) => s[v.slot()],
            Node::Add(a, b) => a.eval_slots(s) + b.eval_slots(s),
            Node::Sub(a, b) => a.eval_slots(s) - b.eval_slots(s),
            Node::Mul(a, b) => a.eval_slots(s) * b.eval_slots(s),
            Node::Div(a, b) => a.eval_slots(s) / b.eval_slots(s),
            Node::Neg(a) => -a.eval_slots(s),
            Node::Sin(a) => a.eval_slots(s).sin(),
            Node::Cos(a) => a.eval_slots(s).cos(),
            Node::Exp(a) => a.eval_slots(s).exp(),
        }
    }

    /// Whether the expression depends on `v`.
    pub fn depends_on(&self, v: Var) -> bool {
        match &*self.0 {
            Node::Const(_) => false,
            Node::Var(w) => *w == v,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
            Node::Neg(a) | Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => a.depends_on(v),
        }
    }

    /// Parses an expression; `consts` supplies named constants.
    pub fn parse(src: &str, consts: &HashMap<String, f64>) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            consts,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::InvalidInput(format!(
                "unexpected trailing input in expression '{src}'"
            )));
        }
        Ok(e)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

fn prec(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Const(c) if *c < 0.0 => 3,
        _ => 4,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if prec(&e.0) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match &*self.0 {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Var(v) => write!(f, "{}", v.name()),
            Node::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Node::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Node::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            Node::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            Node::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 3)
            }
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::InvalidInput(format!(
                "unexpected character '{c}' in expression"
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    consts: &'a HashMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat_op('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat_op('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_op('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat_op('/') {
                acc = acc.div(&self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            Ok(self.unary()?.neg())
        } else if self.eat_op('+') {
            self.unary()
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::InvalidInput("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat_op(')') {
                    return Err(Error::InvalidInput("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::t()),
                "x" => Ok(Expr::x()),
                "y" => Ok(Expr::y()),
                "z" => Ok(Expr::z()),
                "pi" => Ok(Expr::constant(std::f64::consts::PI)),
                "sin" | "cos" | "exp" => {
                    if !self.eat_op('(') {
                        return Err(Error::InvalidInput(format!("expected '(' after {name}")));
                    }
                    let a = self.expr()?;
                    if !self.eat_op(')') {
                        return Err(Error::InvalidInput("missing ')'".into()));
                    }
                    Ok(match name.as_str() {
                        "sin" => a.sin(),
                        "cos" => a.cos(),
                        _ => a.exp(),
                    })
                }
                other => self
                    .consts
                    .get(other)
                    .map(|&v| Expr::constant(v))
                    .ok_or_else(|| Error::InvalidInput(format!("unknown identifier '{other}'"))),
            },
            Tok::Op(c) => Err(Error::InvalidInput(format!("unexpected '{c}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Instr {
    Const(f64),
    Var(u8),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Sin(u32),
    Cos(u32),
    Exp(u32),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(u8),
    Bin(u8, u32, u32),
    Un(u8, u32),
}

/// Straight-line program evaluating several expressions with shared
/// subexpressions computed once.
#[derive(Clone, Debug)]
pub struct Program {
    code: Vec<Instr>,
    outputs: Vec<u32>,
}

struct Compiler {
    code: Vec<Instr>,
    seen: HashMap<Key, u32>,
    by_ptr: HashMap<usize, u32>,
}

impl Compiler {
    fn emit(&mut self, key: Key, ins: Instr) -> u32 {
        if let Some(&r) = self.seen.get(&key) {
            return r;
        }
        let r = self.code.len() as u32;
        self.code.push(ins);
        self.seen.insert(key, r);
        r
    }

    fn compile(&mut self, e: &Expr) -> u32 {
        let ptr = Arc::as_ptr(&e.0) as usize;
        if let Some(&r) = self.by_ptr.get(&ptr) {
            return r;
        }
        let r = match &*e.0 {
            Node::Const(c) => self.emit(Key::Const(c.to_bits()), Instr::Const(*c)),
            Node::Var(v) => {
                let s = v.slot() as u8;
                self.emit(Key::Var(s), Instr::Var(s))
            }
            Node::Add(a, b) => {
                let (ra, rb) = (self.compile(a), self.compile(b));
                let (lo, hi) = (ra.min(rb), ra.max(rb));
                self.emit(Key::Bin(0, lo, hi), Instr::Add(lo, hi))
            }
            Node::Mul(a, b) => {
                let (ra, rb) = (self.compile(a), self.compile(b));
                let (lo, hi) = (ra.min(rb), ra.max(rb));
                self.emit(Key::Bin(2, lo, hi), Instr::Mul(lo, hi))
            }
            Node::Sub(a, b) => {
                let (ra, rb) = (self.compile(a), self.compile(b));
                self.emit(Key::Bin(1, ra, rb), Instr::Sub(ra, rb))
            }
            Node::Div(a, b) => {
                let (ra, rb) = (self.compile(a), self.compile(b));
                self.emit(Key::Bin(3, ra, rb), Instr::Div(ra, rb))
            }
            Node::Neg(a) => {
                let ra = self.compile(a);
                self.emit(Key::Un(0, ra), Instr::Neg(ra))
            }
            Node::Sin(a) => {
                let ra = self.compile(a);
                self.emit(Key::Un(1, ra), Instr::Sin(ra))
            }
            Node::Cos(a) => {
                let ra = self.compile(a);
                self.emit(Key::Un(2, ra), Instr::Cos(ra))
            }
            Node::Exp(a) => {
                let ra = self.compile(a);
                self.emit(Key::Un(3, ra), Instr::Exp(ra))
            }
        };
        self.by_ptr.insert(ptr, r);
        r
    }
}

impl Program {
    pub fn compile(exprs: &[Expr]) -> Program {
        let mut c = Compiler {
            code: Vec::new(),
            seen: HashMap::new(),
            by_ptr: HashMap::new(),
        };
        let outputs = exprs.iter().map(|e| c.compile(e)).collect();
        Program {
            code: c.code,
            outputs,
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    /// Evaluates all outputs at `(t, x, y, z)` into `out`.
    pub fn eval_into(&self, vars: [f64; 4], out: &mut [f64]) {
        const INLINE: usize = 512;
        let mut stack_buf = [0.0f64; INLINE];
        let mut heap_buf;
        let regs: &mut [f64] = if self.code.len() <= INLINE {
            &mut stack_buf[..self.code.len()]
        } else {
            heap_buf = vec![0.0; self.code.len()];
            &mut heap_buf
        };
        for (i, ins) in self.code.iter().enumerate() {
            let v = match *ins {
                Instr::Const(c) => c,
                Instr::Var(s) => vars[s as usize],
                Instr::Add(a, b) => regs[a as usize] + regs[b as usize],
                Instr::Sub(a, b) => regs[a as usize] - regs[b as usize],
                Instr::Mul(a, b) => regs[a as usize] * regs[b as usize],
                Instr::Div(a, b) => regs[a as usize] / regs[b as usize],
                Instr::Neg(a) => -regs[a as usize],
                Instr::Sin(a) => regs[a as usize].sin(),
                Instr::Cos(a) => regs[a as usize].cos(),
                Instr::Exp(a) => regs[a as usize].exp(),
            };
            regs[i] = v;
        }
        for (o, &r) in out.iter_mut().zip(&self.outputs) {
            *o = regs[r as usize];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s, &HashMap::new()).unwrap()
    }

    #[test]
    fn parses_and_evaluates() {
        let e = p("1 + 2*x - y/4 + sin(z)*exp(t)");
        let v = e.eval(0.5, 1.0, 2.0, 0.3);
        let want = 1.0 + 2.0 - 0.5 + 0.3f64.sin() * 0.5f64.exp();
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(p("-2*3").as_const(), Some(-6.0));
        assert_eq!(p("2-3-4").as_const(), Some(-5.0));
        assert_eq!(p("8/4/2").as_const(), Some(1.0));
        assert_eq!(p("1e-3*2").as_const(), Some(2e-3));
        let e = p("-x*x");
        assert_eq!(e.eval(0.0, 3.0, 0.0, 0.0), -9.0);
    }

    #[test]
    fn named_constants() {
        let mut c = HashMap::new();
        c.insert("kappa".to_string(), 0.5);
        let e = Expr::parse("kappa*x", &c).unwrap();
        assert_eq!(e.eval(0.0, 2.0, 0.0, 0.0), 1.0);
        assert!(Expr::parse("lambda*x", &c).is_err());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("sin x", &HashMap::new()).is_err());
        assert!(Expr::parse("(x", &HashMap::new()).is_err());
        assert!(Expr::parse("x $ y", &HashMap::new()).is_err());
        assert!(Expr::parse("x y", &HashMap::new()).is_err());
    }

    #[test]
    fn derivatives_match_hand_results() {
        let e = p("sin(2*x)*exp(t) + y*y/z");
        let (t, x, y, z) = (0.3, 0.7, 1.1, 0.9);
        assert!((e.diff(Var::X).eval(t, x, y, z) - 2.0 * (2.0 * x).cos() * t.exp()).abs() < 1e-14);
        assert!((e.diff(Var::T).eval(t, x, y, z) - (2.0 * x).sin() * t.exp()).abs() < 1e-14);
        assert!((e.diff(Var::Y).eval(t, x, y, z) - 2.0 * y / z).abs() < 1e-14);
        assert!((e.diff(Var::Z).eval(t, x, y, z) + y * y / (z * z)).abs() < 1e-14);
        let c = p("cos(x)");
        assert!((c.diff(Var::X).diff(Var::X).eval(0.0, x, 0.0, 0.0) + x.cos()).abs() < 1e-15);
    }

    #[test]
    fn substitution_shifts_time() {
        let e = p("t*x");
        let s = e.substitute(Var::T, &Expr::t().add(&Expr::constant(2.0)));
        assert_eq!(s.eval(1.0, 3.0, 0.0, 0.0), 9.0);
    }

    #[test]
    fn display_roundtrips() {
        for s in ["1 - (x - y)", "-(x + 2)*sin(t/3)", "x/(y*z)", "exp(-t)*cos(x)", "2 - -3*x"] {
            let e = p(s);
            let back = p(&e.to_string());
            for &(t, x, y, z) in &[(0.1, 0.2, 0.3, 0.4), (1.3, -0.7, 2.0, 0.9)] {
                assert!((e.eval(t, x, y, z) - back.eval(t, x, y, z)).abs() < 1e-14, "{s} -> {e}");
            }
        }
    }

    #[test]
    fn program_matches_tree_and_shares_work() {
        let a = p("sin(x)*cos(y) + exp(t)");
        let b = p("sin(x)*cos(y) - z");
        let prog = Program::compile(&[a.clone(), b.clone(), a.diff(Var::X)]);
        let mut out = [0.0; 3];
        prog.eval_into([0.2, 0.4, 0.6, 0.8], &mut out);
        assert!((out[0] - a.eval(0.2, 0.4, 0.6, 0.8)).abs() < 1e-15);
        assert!((out[1] - b.eval(0.2, 0.4, 0.6, 0.8)).abs() < 1e-15);
        assert!((out[2] - 0.4f64.cos() * 0.6f64.cos()).abs() < 1e-15);
        let separate = Program::compile(&[a]).len() + Program::compile(&[b]).len();
        assert!(prog.len() < separate);
    }
}
