use ndarray::{Array2, Zip};

use crate::scalar::Scalar;

/// First-order update rule for one parameter block.
#[derive(Debug, Clone)]
pub enum Optimizer<T> {
    Plain {
        lr: T,
    },
    Adam {
        lr: T,
        beta1: T,
        beta2: T,
        eps: T,
        step: i32,
        m: Array2<T>,
        v: Array2<T>,
    },
}

impl<T: Scalar> Optimizer<T> {
    pub fn plain(lr: f64) -> Self {
        Optimizer::Plain { lr: T::lit(lr) }
    }

    pub fn adam(lr: f64, shape: (usize, usize)) -> Self {
        Optimizer::Adam {
            lr: T::lit(lr),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step: 0,
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }

    pub fn step(&mut self, param: &mut Array2<T>, grad: &Array2<T>) {
        match self {
            Optimizer::Plain { lr } => param.scaled_add(-*lr, grad),
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let one = T::one();
                let (b1, b2) = (*beta1, *beta2);
                let c1 = one - b1.powi(*step);
                let c2 = one - b2.powi(*step);
                let (lr, eps) = (*lr, *eps);
                Zip::from(param)
                    .and(grad)
                    .and(m)
                    .and(v)
                    .for_each(|p, &g, m, v| {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
                    });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn plain_step() {
        let mut p = array![[1.0f64, 2.0]];
        Optimizer::plain(0.5).step(&mut p, &array![[2.0, -2.0]]);
        assert_eq!(p, array![[0.0, 3.0]]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = array![[1.0f64, 2.0]];
        let mut opt = Optimizer::adam(0.1, (1, 2));
        opt.step(&mut p, &array![[3.0, -0.5]]);
        assert!((p[[0, 0]] - 0.9).abs() < 1e-7);
        assert!((p[[0, 1]] - 2.1).abs() < 1e-7);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = array![[5.0f64]];
        let mut opt = Optimizer::adam(0.1, (1, 1));
        for _ in 0..500 {
            let g = p.mapv(|x| 2.0 * x);
            opt.step(&mut p, &g);
        }
        assert!(p[[0, 0]].abs() < 1e-2);
    }
}
