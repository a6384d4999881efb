use super::matrix::DenseMatrix;
use super::svd::singular_values;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub frobenius: f64,
    pub max_abs: f64,
    pub nuclear: f64,
    pub operator: f64,
}

pub fn norms(a: &DenseMatrix) -> Result<Norms> {
    let s = if a.rows() == 0 || a.cols() == 0 {
        Vec::new()
    } else {
        singular_values(a)?
    };
    Ok(Norms {
        frobenius: a.frobenius_norm(),
        max_abs: a.max_abs(),
        nuclear: s.iter().sum(),
        operator: s.first().copied().unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_norms() {
        let n = norms(&DenseMatrix::identity(5)).unwrap();
        assert_eq!(n.frobenius, 5f64.sqrt());
        assert_eq!(n.max_abs, 1.0);
        assert_eq!(n.nuclear, 5.0);
        assert_eq!(n.operator, 1.0);
    }

    #[test]
    fn zero_norms() {
        let n = norms(&DenseMatrix::zeros(3, 4)).unwrap();
        assert_eq!((n.frobenius, n.max_abs, n.nuclear, n.operator), (0.0, 0.0, 0.0, 0.0));
    }
}
