//! Plain-text model files.
//!
//! ```text
//! GAITMODEL 1
//! PCA <dim> <k> <total_variance> <captured>
//! MEAN <dim reals>
//! EIGENVALUES <k reals>
//! BASIS
//! <k lines of dim reals>
//! SVM <n>                                  or   GALLERY <n>
//! USER <id> <C> <seed> <bias>                   ENTRY <id> <k reals>
//! WEIGHTS <k reals>                             ...
//! ...
//! ```
//!
//! Reals are written with 17 significant digits, which reloads `f64`
//! (and therefore `f32`) values bit for bit.

use std::io::{BufRead, Write};

use crate::error::{GaitError, Result};
use crate::model::{Gallery, PcaModel, SvmModel};
use crate::num::Real;

pub const MAGIC: &str = "GAITMODEL 1";

#[derive(Clone, Debug, PartialEq)]
pub enum Classifier<T> {
    Svm(Vec<SvmModel<T>>),
    Gallery(Gallery<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile<T> {
    pub pca: PcaModel<T>,
    pub classifier: Classifier<T>,
}

fn real<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn reals<T: Real>(xs: &[T]) -> String {
    xs.iter().map(|&x| real(x)).collect::<Vec<_>>().join(" ")
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(GaitError::InvalidConfig(format!(
            "subject id '{id}' cannot be stored in a model file"
        )));
    }
    Ok(())
}

pub fn write_model<T: Real, W: Write>(model: &ModelFile<T>, mut out: W) -> Result<()> {
    let p = &model.pca;
    let mut text = String::new();
    text.push_str(MAGIC);
    text.push('\n');
    text.push_str(&format!(
        "PCA {} {} {} {}\n",
        p.dim(),
        p.k(),
        real(p.total_variance),
        real(p.captured)
    ));
    text.push_str(&format!("MEAN {}\n", reals(&p.mean)));
    text.push_str(&format!("EIGENVALUES {}\n", reals(&p.eigenvalues)));
    text.push_str("BASIS\n");
    for u in &p.basis {
        text.push_str(&reals(u));
        text.push('\n');
    }
    match &model.classifier {
        Classifier::Svm(users) => {
            text.push_str(&format!("SVM {}\n", users.len()));
            for u in users {
                check_id(&u.subject_id)?;
                text.push_str(&format!(
                    "USER {} {} {} {}\n",
                    u.subject_id,
                    real(u.c_param),
                    u.seed,
                    real(u.bias)
                ));
                text.push_str(&format!("WEIGHTS {}\n", reals(&u.weights)));
            }
        }
        Classifier::Gallery(g) => {
            text.push_str(&format!("GALLERY {}\n", g.len()));
            for (id, v) in &g.entries {
                check_id(id)?;
                text.push_str(&format!("ENTRY {id} {}\n", reals(v)));
            }
        }
    }
    out.write_all(text.as_bytes())
        .map_err(|e| GaitError::io("<model writer>", e))
}

struct Lines<I> {
    inner: I,
    line: usize,
}

impl<I: Iterator<Item = std::io::Result<String>>> Lines<I> {
    fn err(&self, msg: impl Into<String>) -> GaitError {
        GaitError::ModelFormat {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(GaitError::io("<model reader>", e)),
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// Next line, which must start with `tag`; returns the remaining fields.
    fn tagged(&mut self, tag: &str) -> Result<Vec<String>> {
        let l = self.next()?;
        let mut fields = l.split_whitespace();
        if fields.next() != Some(tag) {
            return Err(self.err(format!("expected {tag}")));
        }
        Ok(fields.map(str::to_string).collect())
    }

    fn parse<V: std::str::FromStr>(&self, s: &str) -> Result<V> {
        s.parse().map_err(|_| self.err(format!("invalid value '{s}'")))
    }

    fn reals<T: Real>(&self, fields: &[String], n: usize) -> Result<Vec<T>> {
        if fields.len() != n {
            return Err(self.err(format!("expected {n} values, got {}", fields.len())));
        }
        fields
            .iter()
            .map(|f| {
                let v: f64 = self.parse(f)?;
                if v.is_finite() {
                    Ok(T::lit(v))
                } else {
                    Err(self.err("non-finite value"))
                }
            })
            .collect()
    }

    fn real<T: Real>(&self, field: &str) -> Result<T> {
        Ok(self.reals::<T>(&[field.to_string()], 1)?[0])
    }
}

pub fn read_model<T: Real, R: BufRead>(input: R) -> Result<ModelFile<T>> {
    let mut l = Lines {
        inner: input.lines(),
        line: 0,
    };
    if l.next()?.trim_end() != MAGIC {
        return Err(l.err(format!("missing '{MAGIC}' header")));
    }
    let head = l.tagged("PCA")?;
    if head.len() != 4 {
        return Err(l.err("PCA line needs dim, k, total variance and captured fraction"));
    }
    let dim: usize = l.parse(&head[0])?;
    let k: usize = l.parse(&head[1])?;
    let total_variance = l.real(&head[2])?;
    let captured = l.real(&head[3])?;
    let mean = {
        let f = l.tagged("MEAN")?;
        l.reals(&f, dim)?
    };
    let eigenvalues = {
        let f = l.tagged("EIGENVALUES")?;
        l.reals(&f, k)?
    };
    if !l.tagged("BASIS")?.is_empty() {
        return Err(l.err("BASIS takes no arguments"));
    }
    let mut basis = Vec::with_capacity(k);
    for _ in 0..k {
        let row: Vec<String> = l.next()?.split_whitespace().map(str::to_string).collect();
        basis.push(l.reals(&row, dim)?);
    }
    let pca = PcaModel {
        mean,
        basis,
        eigenvalues,
        total_variance,
        captured,
    };

    let section = l.next()?;
    let fields: Vec<&str> = section.split_whitespace().collect();
    let classifier = match fields.as_slice() {
        ["SVM", n] => {
            let n: usize = l.parse(n)?;
            let mut users = Vec::with_capacity(n);
            for _ in 0..n {
                let u = l.tagged("USER")?;
                if u.len() != 4 {
                    return Err(l.err("USER line needs id, C, seed and bias"));
                }
                let c_param = l.real(&u[1])?;
                let seed = l.parse(&u[2])?;
                let bias = l.real(&u[3])?;
                let w = l.tagged("WEIGHTS")?;
                users.push(SvmModel {
                    subject_id: u[0].clone(),
                    weights: l.reals(&w, k)?,
                    bias,
                    c_param,
                    seed,
                });
            }
            Classifier::Svm(users)
        }
        ["GALLERY", n] => {
            let n: usize = l.parse(n)?;
            let mut g = Gallery::new();
            for _ in 0..n {
                let e = l.tagged("ENTRY")?;
                let Some((id, rest)) = e.split_first() else {
                    return Err(l.err("ENTRY needs a subject id"));
                };
                let v = l.reals(rest, k)?;
                g.push(id.clone(), v)?;
            }
            Classifier::Gallery(g)
        }
        _ => return Err(l.err("expected SVM or GALLERY section")),
    };
    Ok(ModelFile { pca, classifier })
}
