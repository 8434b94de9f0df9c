//! Dense matrices and a reverse-mode gradient tape.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, RELATIVE_FLOOR};
pub use matrix::Matrix;
pub use tape::{Gradients, ParamId, ParamSet, Parameter, Propagation, Segments, Tape, Var};

#[cfg(test)]
mod tests {
    use std::rc::Rc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::error::Error;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Checks one primitive: `op` maps the listed parameters to a matrix,
    /// which is reduced to a scalar through a fixed random projection so
    /// every output entry contributes.
    fn check_op(
        shapes: &[(usize, usize)],
        seed: u64,
        op: impl Fn(&mut Tape, &[Var]) -> crate::Result<Var>,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (i, &(r, c)) in shapes.iter().enumerate() {
            params.push(Parameter::new(format!("p{i}"), random(&mut rng, r, c)));
        }
        let weights_seed = rng.random::<u64>();
        let report = grad_check(
            |tape, ps| {
                let vars: Vec<_> = ps.ids().map(|id| tape.param(ps, id)).collect();
                let out = op(tape, &vars)?;
                let (r, c) = tape.value(out).shape();
                let mut wrng = ChaCha8Rng::seed_from_u64(weights_seed);
                let w = tape.constant(random(&mut wrng, r, c));
                let prod = tape.mul(out, w)?;
                Ok(tape.sum(prod))
            },
            &mut params,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn primitive_gradients_match_finite_differences() {
        check_op(&[(3, 4), (4, 2)], 1, |t, v| t.matmul(v[0], v[1]));
        check_op(&[(3, 4), (3, 4)], 2, |t, v| t.add(v[0], v[1]));
        check_op(&[(3, 4), (3, 4)], 3, |t, v| t.sub(v[0], v[1]));
        check_op(&[(3, 4), (3, 4)], 4, |t, v| t.mul(v[0], v[1]));
        check_op(&[(3, 4), (1, 4)], 5, |t, v| t.add_row(v[0], v[1]));
        check_op(&[(3, 4)], 6, |t, v| Ok(t.scalar_mul(v[0], -2.5)));
        check_op(&[(3, 4), (3, 1)], 7, |t, v| t.scale_rows(v[0], v[1]));
        check_op(&[(2, 3), (4, 3)], 8, |t, v| t.row_concat(&[v[0], v[1]]));
        check_op(&[(2, 3), (2, 1)], 9, |t, v| t.col_concat(&[v[0], v[1]]));
        check_op(&[(5, 3)], 10, |t, v| t.row_slice(v[0], 1, 3));
        check_op(&[(4, 5)], 11, |t, v| Ok(t.leaky_relu(v[0], 0.2)));
        check_op(&[(4, 5)], 12, |t, v| Ok(t.relu(v[0])));
        check_op(&[(3, 6)], 13, |t, v| Ok(t.softmax_rows(v[0])));
        check_op(&[(3, 6)], 14, |t, v| Ok(t.log_softmax_rows(v[0])));
        check_op(&[(5, 3)], 15, |t, v| {
            let seg = Rc::new(Segments::new(vec![0, 0, 1, 1, 1], 2)?);
            t.segment_mean(v[0], seg)
        });
        check_op(&[(5, 3)], 16, |t, v| {
            t.segment_max_abs(v[0], &Segments::new(vec![1, 0, 1, 0, 1], 2)?)
        });
        check_op(&[(4, 3)], 17, |t, v| t.gather_rows(v[0], Rc::new(vec![2, 0, 2, 3])));
        check_op(&[(5, 3)], 18, |t, v| {
            t.scatter_add_rows(v[0], Rc::new(vec![1, 0, 1, 3, 1]), 4)
        });
        check_op(&[(6, 2)], 19, |t, v| {
            t.group_softmax(v[0], Rc::new(vec![0, 1, 0, 2, 1, 0]))
        });
        check_op(&[(4, 3)], 20, |t, v| {
            let prop = Propagation {
                num_out: 3,
                num_in: 4,
                entries: vec![(0, 1, 0.5), (2, 3, -1.5), (2, 0, 2.0), (0, 1, 0.25)],
            };
            t.propagate(v[0], Rc::new(prop))
        });
        check_op(&[(3, 4)], 21, |t, v| {
            let mask = (0..12).map(|i| i % 3 != 1).collect();
            t.masked_softmax(v[0], Rc::new(mask))
        });
        check_op(&[(4, 6)], 22, |t, v| t.dropout(v[0], 0.5, true, 99));
        check_op(&[(3, 3)], 23, |t, v| {
            let e = t.exp(v[0]);
            Ok(t.log(e))
        });
        check_op(&[(2, 5)], 24, |t, v| Ok(t.transpose(v[0])));
        check_op(&[(2, 5)], 25, |t, v| Ok(t.mean(v[0])));
        check_op(&[(4, 6)], 26, |t, v| {
            let lp = t.log_softmax_rows(v[0]);
            t.nll(lp, Rc::new(vec![0, 5, 2, 2]), Rc::new(vec![1.0, 0.5, 2.0, 1.0, 1.0, 3.0]))
        });
    }

    #[test]
    fn forward_examples() {
        let mut t = Tape::new();
        let m = t.constant(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap());
        let i3 = t.constant(Matrix::identity(3));
        let prod = t.matmul(i3, m).unwrap();
        assert_eq!(t.value(prod), t.value(m));

        let x = t.constant(Matrix::row_vector(vec![-1.0, 2.0]));
        let r = t.relu(x);
        assert_eq!(t.value(r).as_slice(), [0.0, 2.0]);

        let rows = t.constant(Matrix::from_rows(&[[1.5, -2.0], [1.5, -2.0]]).unwrap());
        let pooled = t.segment_mean(rows, Rc::new(Segments::single(2))).unwrap();
        assert_eq!(t.value(pooled).as_slice(), [1.5, -2.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3));
        let b = t.constant(Matrix::zeros(2, 2));
        match t.matmul(a, b) {
            Err(Error::ShapeMismatch { op, left, right }) => {
                assert_eq!((op, left, right), ("matmul", (2, 3), (2, 2)));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(t.add(a, b).is_err());
        assert!(t.col_concat(&[a, b]).is_ok());
        let c = t.constant(Matrix::zeros(3, 3));
        assert!(t.col_concat(&[a, c]).is_err());
    }

    #[test]
    fn backward_examples() {
        // loss = sum(W x) with x fixed: dW[i][j] = x[j].
        let mut params = ParamSet::new();
        let w = params.push(Parameter::new(
            "w",
            Matrix::from_rows(&[[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]]).unwrap(),
        ));
        let unused = params.push(Parameter::new("unused", Matrix::filled(2, 2, 7.0)));
        params.get_mut(unused).grad.fill(5.0);
        let x = Matrix::column_vector(vec![0.3, -1.2, 2.0]);

        let mut t = Tape::new();
        let wv = t.param(&params, w);
        let xv = t.constant(x.clone());
        let wx = t.matmul(wv, xv).unwrap();
        let loss = t.sum(wx);
        t.backward(loss, &mut params).unwrap();
        let expected = Matrix::from_rows(&[[0.3, -1.2, 2.0], [0.3, -1.2, 2.0]]).unwrap();
        assert!(params.get(w).grad.max_abs_diff(&expected) < 1e-15);
        assert_eq!(params.get(unused).grad, Matrix::zeros(2, 2));

        // loss = ||W||^2: dW = 2W.
        let mut t = Tape::new();
        let wv = t.param(&params, w);
        let sq = t.mul(wv, wv).unwrap();
        let loss = t.sum(sq);
        t.backward(loss, &mut params).unwrap();
        let mut twice = params.get(w).value.clone();
        twice.scale(2.0);
        assert!(params.get(w).grad.max_abs_diff(&twice) < 1e-15);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut params = ParamSet::new();
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 2));
        assert!(matches!(
            t.backward(a, &mut params),
            Err(Error::NonScalarLoss { rows: 2, cols: 2 })
        ));
    }

    #[test]
    fn dropout_modes() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::filled(50, 40, 1.0));
        assert_eq!(t.dropout(x, 0.5, false, 1).unwrap(), x);
        let d = t.dropout(x, 0.5, true, 1).unwrap();
        let values = t.value(d).as_slice();
        assert!(values.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = values.iter().filter(|&&v| v == 2.0).count();
        assert!((800..1200).contains(&kept), "kept {kept} of 2000");
        let again = t.dropout(x, 0.5, true, 1).unwrap();
        assert_eq!(t.value(again), t.value(d));
        assert!(t.dropout(x, 1.0, true, 1).is_err());
    }

    #[test]
    fn quadratic_grad_check_is_tight() {
        let mut params = ParamSet::new();
        params.push(Parameter::new(
            "x",
            Matrix::row_vector(vec![0.7, -1.3, 2.2, 0.05]),
        ));
        let report = grad_check(
            |t, ps| {
                let x = t.param(ps, ps.ids().next().unwrap());
                let sq = t.mul(x, x)?;
                let s = t.scalar_mul(sq, 3.0);
                Ok(t.sum(s))
            },
            &mut params,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.entries, 4);
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let mut params = ParamSet::new();
        params.push(Parameter::new("x", Matrix::filled(2, 2, 1.0)));
        let report = grad_check(
            |t, _| Ok(t.constant(Matrix::scalar(4.0))),
            &mut params,
            1e-5,
            1e-12,
        )
        .unwrap();
        assert_eq!(report.max_abs_error, 0.0);
        assert!(report.passed());
        assert!(grad_check(|t, _| Ok(t.constant(Matrix::scalar(1.0))), &mut params, 0.0, 1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn softmax_rows_sum_to_one(values in proptest::collection::vec(-50.0f64..50.0, 12)) {
            let mut t = Tape::new();
            let x = t.constant(Matrix::new(3, 4, values).unwrap());
            let s = t.softmax_rows(x);
            for row in t.value(s).row_iter() {
                proptest::prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
