//! Textual model grammar.
//!
//! ```text
//! spec    := gaussian(mu, sigma) | laplace(mu, b) | sawtooth(w, delta)
//!          | mixture(term + term + ...) | product(spec ^ d) | product(spec, spec, ...)
//! term    := weight * gaussian(mu, sigma)
//! ```
//!
//! Whitespace is ignored and numbers follow Rust's float syntax (decimal or
//! scientific). Product components must be one-dimensional. Location shifts are
//! not part of the grammar.

use std::fmt;
use std::str::FromStr;

use super::{Density1d, DensityHd, Family, MixtureComponent};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Univariate(Density1d),
    Product(DensityHd),
}

impl ModelSpec {
    pub fn parse(input: &str) -> Result<Self> {
        let mut p = Parser::new(input);
        let spec = p.spec()?;
        p.expect_end()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Univariate(_) => 1,
            Self::Product(h) => h.dim(),
        }
    }

    pub fn univariate(self) -> Result<Density1d> {
        match self {
            Self::Univariate(d) => Ok(d),
            Self::Product(_) => Err(Error::Config("expected a one-dimensional model".into())),
        }
    }

    /// A product view; a univariate model becomes a 1-dimensional product.
    pub fn product(self) -> Result<DensityHd> {
        match self {
            Self::Univariate(d) => DensityHd::new(vec![d]),
            Self::Product(h) => Ok(h),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for Density1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family() {
            Family::Gaussian { mu, sigma } => write!(f, "gaussian({mu},{sigma})"),
            Family::Laplace { mu, b } => write!(f, "laplace({mu},{b})"),
            Family::GaussianSawtooth(s) => write!(f, "sawtooth({},{})", s.width(), s.slope()),
            Family::GaussianMixture(cs) => {
                f.write_str("mixture(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{}*gaussian({},{})", c.weight, c.mu, c.sigma)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Univariate(d) => d.fmt(f),
            Self::Product(h) => {
                let cs = h.components();
                if cs.iter().all(|c| c == &cs[0]) {
                    write!(f, "product({}^{})", cs[0], cs.len())
                } else {
                    f.write_str("product(")?;
                    for (i, c) in cs.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        c.fmt(f)?;
                    }
                    f.write_str(")")
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, expected: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == expected => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(c) => self.err(format!("expected '{expected}', found '{c}'")),
            None => self.err(format!("expected '{expected}', found end of input")),
        }
    }

    fn expect_end(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(c) => self.err(format!("unexpected trailing '{c}'")),
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(self.src.len() - start);
        if len == 0 {
            return self.err("expected a model name");
        }
        self.pos += len;
        Ok(self.src[start..start + len].to_ascii_lowercase())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() {
            let c = bytes[end];
            let sign_ok = (c == b'+' || c == b'-') && (end == start || matches!(bytes[end - 1], b'e' | b'E'));
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || sign_ok {
                end += 1;
            } else {
                break;
            }
        }
        match self.src[start..end].parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = end;
                Ok(v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn pair(&mut self) -> Result<(f64, f64)> {
        self.eat('(')?;
        let a = self.number()?;
        self.eat(',')?;
        let b = self.number()?;
        self.eat(')')?;
        Ok((a, b))
    }

    fn at<T>(&self, position: usize, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Config(message) | Error::Domain(message) => Error::Parse { position, message },
            other => other,
        })
    }

    fn univariate(&mut self) -> Result<Density1d> {
        match self.spec()? {
            ModelSpec::Univariate(d) => Ok(d),
            ModelSpec::Product(_) => self.err("product components must be one-dimensional"),
        }
    }

    fn spec(&mut self) -> Result<ModelSpec> {
        self.skip_ws();
        let start = self.pos;
        let name = self.ident()?;
        let density = match name.as_str() {
            "gaussian" | "normal" => {
                let (mu, sigma) = self.pair()?;
                self.at(start, Density1d::gaussian(mu, sigma))?
            }
            "laplace" => {
                let (mu, b) = self.pair()?;
                self.at(start, Density1d::laplace(mu, b))?
            }
            "sawtooth" => {
                let (w, delta) = self.pair()?;
                self.at(start, Density1d::sawtooth(w, delta))?
            }
            "mixture" => {
                self.eat('(')?;
                let mut comps = Vec::new();
                loop {
                    let weight = self.number()?;
                    self.eat('*')?;
                    let inner = self.pos;
                    let kind = self.ident()?;
                    if kind != "gaussian" && kind != "normal" {
                        self.pos = inner;
                        return self.err("mixture components must be gaussian(mu,sigma)");
                    }
                    let (mu, sigma) = self.pair()?;
                    comps.push(MixtureComponent { weight, mu, sigma });
                    if self.peek() == Some('+') {
                        self.eat('+')?;
                    } else {
                        break;
                    }
                }
                self.eat(')')?;
                self.at(start, Family::mixture(comps).map(Density1d::new))?
            }
            "product" => {
                self.eat('(')?;
                let first = self.univariate()?;
                let components = if self.peek() == Some('^') {
                    self.eat('^')?;
                    let p = self.pos;
                    let d = self.number()?;
                    if d < 1.0 || d.fract() != 0.0 {
                        self.pos = p;
                        return self.err("product dimension must be a positive integer");
                    }
                    vec![first; d as usize]
                } else {
                    let mut cs = vec![first];
                    while self.peek() == Some(',') {
                        self.eat(',')?;
                        cs.push(self.univariate()?);
                    }
                    cs
                };
                self.eat(')')?;
                return Ok(ModelSpec::Product(DensityHd::new(components)?));
            }
            other => {
                self.pos = start;
                return self.err(format!("unknown model '{other}'"));
            }
        };
        Ok(ModelSpec::Univariate(density))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_each_form() {
        let g = ModelSpec::parse("gaussian(0, 1)").unwrap().univariate().unwrap();
        assert_eq!(g, Density1d::gaussian(0.0, 1.0).unwrap());
        let l = ModelSpec::parse(" Laplace( 1e-1 , 2.5E0 ) ").unwrap();
        assert_eq!(l, ModelSpec::Univariate(Density1d::laplace(0.1, 2.5).unwrap()));
        let m = ModelSpec::parse("mixture(0.9*gaussian(0,0.1)+0.1*gaussian(5,1))").unwrap();
        assert_eq!(m, ModelSpec::Univariate(Density1d::mixture(&[(0.9, 0.0, 0.1), (0.1, 5.0, 1.0)]).unwrap()));
        let s = ModelSpec::parse("sawtooth(0.05,4)").unwrap();
        assert_eq!(s.dim(), 1);
        let p = ModelSpec::parse("product(gaussian(0,1)^8)").unwrap();
        assert_eq!(p.dim(), 8);
        let q = ModelSpec::parse("product(laplace(0,1), gaussian(0,2), sawtooth(0.1,1))").unwrap();
        assert_eq!(q.dim(), 3);
    }

    #[test]
    fn errors_carry_positions() {
        match ModelSpec::parse("gaussian(0,1") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 12),
            other => panic!("unexpected {other:?}"),
        }
        match ModelSpec::parse("  cauchy(0,1)") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(ModelSpec::parse("gaussian(0,-1)"), Err(Error::Parse { position: 0, .. })));
        assert!(ModelSpec::parse("product(gaussian(0,1)^0)").is_err());
        assert!(ModelSpec::parse("product(product(gaussian(0,1)^2)^2)").is_err());
        assert!(ModelSpec::parse("mixture(0.5*gaussian(0,1)+0.4*gaussian(1,1))").is_err());
        assert!(ModelSpec::parse("gaussian(0,1) x").is_err());
    }

    fn arb_density() -> impl Strategy<Value = Density1d> {
        prop_oneof![
            (-5.0..5.0f64, 0.01..5.0f64).prop_map(|(m, s)| Density1d::gaussian(m, s).unwrap()),
            (-5.0..5.0f64, 0.01..5.0f64).prop_map(|(m, b)| Density1d::laplace(m, b).unwrap()),
            (0.01..0.5f64, 0.0..1.0f64).prop_map(|(w, t)| Density1d::sawtooth(w, t * 0.4 / w).unwrap()),
            (0.05..0.95f64, -3.0..3.0f64, 0.1..2.0f64).prop_map(|(w, m, s)| {
                Density1d::mixture(&[(w, m, s), (1.0 - w, -m, 2.0 * s)]).unwrap()
            }),
        ]
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(d in arb_density(), dim in 1usize..5, product in any::<bool>()) {
            let spec = if product {
                ModelSpec::Product(DensityHd::iid(d, dim).unwrap())
            } else {
                ModelSpec::Univariate(d)
            };
            let text = spec.to_string();
            let back = ModelSpec::parse(&text).unwrap();
            prop_assert_eq!(back.to_string(), text);
        }
    }
}
