use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Dense row-major array with an optional gradient buffer of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
    grad: Option<Vec<S>>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![S::zero(); n], grad: None }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(shape_err(format!("{shape:?} ({n} values)"), data.len()));
        }
        Ok(Self { shape: shape.to_vec(), data, grad: None })
    }

    /// Attaches a zeroed gradient buffer.
    pub fn tracked(mut self) -> Self {
        self.grad = Some(vec![S::zero(); self.data.len()]);
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn grad(&self) -> Option<&[S]> {
        self.grad.as_deref()
    }

    /// Gradient buffer; panics on an untracked tensor.
    pub fn grad_mut(&mut self) -> &mut [S] {
        self.grad.as_deref_mut().expect("gradient requested on untracked tensor")
    }

    /// Simultaneous access to values and gradient.
    pub fn parts_mut(&mut self) -> (&mut [S], &mut [S]) {
        (&mut self.data, self.grad.as_deref_mut().expect("untracked tensor"))
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = S::zero());
        }
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::of(v.f64())).collect(),
            grad: self.grad.as_ref().map(|g| g.iter().map(|v| T::of(v.f64())).collect()),
        }
    }
}

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<S> {
    entries: Vec<(String, Tensor<S>)>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<S>) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Format(format!("duplicate parameter name {name}")));
        }
        self.entries.push((name, t));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Keeps entries whose name starts with `prefix`, stripping it.
    pub fn subset(&self, prefix: &str) -> ParamSet<S> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .filter_map(|(n, t)| n.strip_prefix(prefix).map(|rest| (rest.to_string(), t.clone())))
                .collect(),
        }
    }

    pub fn prefixed(&self, prefix: &str) -> ParamSet<S> {
        ParamSet {
            entries: self.entries.iter().map(|(n, t)| (format!("{prefix}{n}"), t.clone())).collect(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> ParamSet<T> {
        ParamSet { entries: self.entries.iter().map(|(n, t)| (n.clone(), t.cast())).collect() }
    }

    pub fn extend(&mut self, other: ParamSet<S>) -> Result<()> {
        for (n, t) in other.entries {
            self.insert(n, t)?;
        }
        Ok(())
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Anything owning parameter tensors. Visiting order is the canonical
/// parameter order used by the optimiser, checkpoints and gradient checks.
pub trait Module<S: Scalar> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>));

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>));

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, t| t.zero_grad());
    }

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.numel());
        n
    }

    fn param_set(&self) -> ParamSet<S> {
        let mut ps = ParamSet::new();
        self.visit("", &mut |name, t| {
            let mut t = t.clone();
            t.grad = None;
            ps.entries.push((name.to_string(), t));
        });
        ps
    }

    /// Overwrites every parameter from `ps`; names and shapes must match exactly.
    fn load_params(&mut self, ps: &ParamSet<S>) -> Result<()> {
        let mut err = None;
        let mut seen = 0;
        self.visit_mut("", &mut |name, t| {
            if err.is_some() {
                return;
            }
            match ps.get(name) {
                Some(src) if src.shape() == t.shape() => {
                    t.data_mut().copy_from_slice(src.data());
                    seen += 1;
                }
                Some(src) => err = Some(shape_err(format!("{name} {:?}", t.shape()), format!("{:?}", src.shape()))),
                None => err = Some(Error::Format(format!("missing parameter {name}"))),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if seen != ps.len() {
            return Err(Error::Format(format!("{} unexpected parameters", ps.len() - seen)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f32>::from_vec(&[2, 3], vec![1.0; 6]).unwrap().tracked();
        assert_eq!(t.grad().unwrap().len(), t.numel());
    }

    #[test]
    fn unique_names() {
        let mut ps = ParamSet::<f64>::new();
        ps.insert("a", Tensor::zeros(&[1])).unwrap();
        assert!(ps.insert("a", Tensor::zeros(&[1])).is_err());
    }
}
