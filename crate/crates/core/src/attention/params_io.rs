//! Plain-text parameter files.
//!
//! A file is a sequence of blocks. Each block is a header line naming the
//! block and its dimensions, followed by its values in row-major order using
//! the same number syntax as tensor fixtures:
//!
//! ```text
//! eca <k> <gamma> <b_offset>       kernel (k values)
//! cam <C> <r>                      W1 (C/r x C), b1 (C/r), W2 (C x C/r), b2 (C)
//! sam 2 7 7                        kernel (2 x 7 x 7), bias (1)
//! sppf <Cin> <Cmid> <Cout>         reduce W (Cmid x Cin), reduce b (Cmid),
//!                                  expand W (Cout x 4*Cmid), expand b (Cout)
//! ```
//!
//! A CBAM parameter set is a `cam` block followed by a `sam` block. Line
//! breaks after a header are not significant.

use std::fmt::Write as _;

use crate::attention::{CamParams, CbamParams, EcaParams, SamParams, SppfParams, SAM_KERNEL};
use crate::error::{Error, Result};
use crate::tensor::{parse_real, Matrix, Tensor};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamBlock<T> {
    Eca(EcaParams<T>),
    Cam(CamParams<T>),
    Sam(SamParams<T>),
    Sppf(SppfParams<T>),
}

fn push_rows<T: Scalar>(out: &mut String, values: &[T], row_len: usize) {
    if row_len == 0 {
        return;
    }
    for row in values.chunks(row_len) {
        let line: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

impl<T: Scalar> EcaParams<T> {
    pub fn to_text(&self) -> String {
        let mut s = format!("eca {} {} {}\n", self.kernel().len(), self.gamma().as_f64(), self.b_offset().as_f64());
        push_rows(&mut s, self.kernel(), self.kernel().len());
        s
    }
}

impl<T: Scalar> CamParams<T> {
    pub fn to_text(&self) -> String {
        let (c, h) = (self.channels(), self.hidden());
        let mut s = format!("cam {c} {}\n", self.reduction());
        push_rows(&mut s, self.w1().data(), c);
        push_rows(&mut s, self.b1(), h);
        push_rows(&mut s, self.w2().data(), h);
        push_rows(&mut s, self.b2(), c);
        s
    }
}

impl<T: Scalar> SamParams<T> {
    pub fn to_text(&self) -> String {
        let mut s = format!("sam 2 {SAM_KERNEL} {SAM_KERNEL}\n");
        push_rows(&mut s, self.kernel().data(), SAM_KERNEL);
        push_rows(&mut s, &[self.bias()], 1);
        s
    }
}

impl<T: Scalar> SppfParams<T> {
    pub fn to_text(&self) -> String {
        let mut s = format!("sppf {} {} {}\n", self.c_in(), self.c_mid(), self.c_out());
        push_rows(&mut s, self.reduce_kernel().data(), self.c_in());
        push_rows(&mut s, self.reduce_bias(), self.c_mid());
        push_rows(&mut s, self.expand_kernel().data(), 4 * self.c_mid());
        push_rows(&mut s, self.expand_bias(), self.c_out());
        s
    }
}

impl<T: Scalar> CbamParams<T> {
    pub fn to_text(&self) -> String {
        self.cam.to_text() + &self.sam.to_text()
    }
}

impl<T: Scalar> ParamBlock<T> {
    pub fn to_text(&self) -> String {
        match self {
            ParamBlock::Eca(p) => p.to_text(),
            ParamBlock::Cam(p) => p.to_text(),
            ParamBlock::Sam(p) => p.to_text(),
            ParamBlock::Sppf(p) => p.to_text(),
        }
    }
}

struct Tokens<'a> {
    inner: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.inner.next().ok_or_else(|| Error::Parse(format!("unexpected end of parameters, expected {what}")))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let t = self.next(what)?;
        t.parse().map_err(|_| Error::Parse(format!("expected {what}, got `{t}`")))
    }

    fn real<T: Scalar>(&mut self, what: &str) -> Result<T> {
        parse_real(self.next(what)?)
    }

    fn reals<T: Scalar>(&mut self, n: usize, what: &str) -> Result<Vec<T>> {
        (0..n).map(|_| self.real(what)).collect()
    }
}

pub fn parse_param_blocks<T: Scalar>(text: &str) -> Result<Vec<ParamBlock<T>>> {
    let mut tok = Tokens { inner: text.split_whitespace().peekable() };
    let mut blocks = Vec::new();
    while let Some(kind) = tok.inner.next() {
        let block = match kind {
            "eca" => {
                let k = tok.usize("eca kernel length")?;
                let gamma = tok.real("gamma")?;
                let b = tok.real("b_offset")?;
                ParamBlock::Eca(EcaParams::new(tok.reals(k, "eca kernel")?, gamma, b)?)
            }
            "cam" => {
                let c = tok.usize("cam channels")?;
                let r = tok.usize("cam reduction")?;
                if r == 0 || c == 0 || c % r != 0 {
                    return Err(Error::Parse(format!("cam header {c} {r}: reduction must divide channels")));
                }
                let h = c / r;
                let w1 = Matrix::new(h, c, tok.reals(h * c, "cam W1")?)?;
                let b1 = tok.reals(h, "cam b1")?;
                let w2 = Matrix::new(c, h, tok.reals(c * h, "cam W2")?)?;
                let b2 = tok.reals(c, "cam b2")?;
                ParamBlock::Cam(CamParams::new(r, w1, b1, w2, b2)?)
            }
            "sam" => {
                let dims = [tok.usize("sam channels")?, tok.usize("sam kh")?, tok.usize("sam kw")?];
                if dims != [2, SAM_KERNEL, SAM_KERNEL] {
                    return Err(Error::Parse(format!("sam header must be `sam 2 7 7`, got {dims:?}")));
                }
                let kernel = Tensor::new([1, 2, SAM_KERNEL, SAM_KERNEL], tok.reals(2 * SAM_KERNEL * SAM_KERNEL, "sam kernel")?)?;
                let bias = tok.real("sam bias")?;
                ParamBlock::Sam(SamParams::new(kernel, bias)?)
            }
            "sppf" => {
                let (ci, cm, co) = (tok.usize("sppf Cin")?, tok.usize("sppf Cmid")?, tok.usize("sppf Cout")?);
                let rk = Tensor::new([cm, ci, 1, 1], tok.reals(cm * ci, "sppf reduce kernel")?)?;
                let rb = tok.reals(cm, "sppf reduce bias")?;
                let ek = Tensor::new([co, 4 * cm, 1, 1], tok.reals(co * 4 * cm, "sppf expand kernel")?)?;
                let eb = tok.reals(co, "sppf expand bias")?;
                ParamBlock::Sppf(SppfParams::new(rk, rb, ek, eb)?)
            }
            other => return Err(Error::Parse(format!("unknown parameter block `{other}`"))),
        };
        blocks.push(block);
    }
    Ok(blocks)
}
