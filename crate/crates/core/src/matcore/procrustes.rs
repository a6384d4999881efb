use super::matrix::DenseMatrix;
use super::svd::svd_full;
use crate::error::{Error, Result};

/// Solution of the orthogonal Procrustes problem `min_R ‖a R - b‖_F²`.
#[derive(Clone, Debug)]
pub struct Alignment {
    pub rotation: DenseMatrix,
    pub residual: f64,
}

/// Closed form via the SVD of `aᵀb = U Σ Wᵀ`, giving `R = U Wᵀ`.
///
/// When `aᵀb` vanishes the rotation is left at the identity; every
/// orthogonal `R` attains the same residual then.
pub fn procrustes_align(a: &DenseMatrix, b: &DenseMatrix) -> Result<Alignment> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "procrustes_align",
            format!("{}x{}", a.rows(), a.cols()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    let r = a.cols();
    let cross = a.tr_matmul(b)?;
    let rotation = if cross.max_abs() == 0.0 {
        DenseMatrix::identity(r)
    } else {
        let svd = svd_full(&cross)?;
        svd.u.matmul_tr(&svd.v)?
    };
    let residual = a.matmul(&rotation)?.sub(b)?.frobenius_sq();
    Ok(Alignment { rotation, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::Rng;

    fn random_orthogonal(r: usize, rng: &mut Rng) -> DenseMatrix {
        let g = DenseMatrix::from_fn(r, r, |_, _| rng.normal());
        let s = svd_full(&g).unwrap();
        s.u.matmul_tr(&s.v).unwrap()
    }

    fn random_frame(d: usize, r: usize, rng: &mut Rng) -> DenseMatrix {
        let g = DenseMatrix::from_fn(d, r, |_, _| rng.normal());
        svd_full(&g).unwrap().u
    }

    #[test]
    fn identical_frames() {
        let mut rng = Rng::new(1);
        let q = random_frame(6, 3, &mut rng);
        let al = procrustes_align(&q, &q).unwrap();
        assert!(al.residual < 1e-20);
        assert!(al.rotation.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn recovers_inverse_rotation() {
        let mut rng = Rng::new(2);
        let q = random_frame(8, 4, &mut rng);
        let r0 = random_orthogonal(4, &mut rng);
        let a = q.matmul(&r0).unwrap();
        let al = procrustes_align(&a, &q).unwrap();
        assert!(al.residual < 1e-20);
        assert!(al.rotation.sub(&r0.transpose()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn orthogonal_inputs_give_identity() {
        let a = DenseMatrix::from_rows(&[[1.0], [0.0]]);
        let b = DenseMatrix::from_rows(&[[0.0], [1.0]]);
        let al = procrustes_align(&a, &b).unwrap();
        assert_eq!(al.rotation, DenseMatrix::identity(1));
        assert!((al.residual - 2.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        assert!(procrustes_align(&DenseMatrix::zeros(3, 2), &DenseMatrix::zeros(3, 1)).is_err());
    }
}
