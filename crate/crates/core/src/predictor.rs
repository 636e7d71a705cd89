use ndarray::{Array1, Array2, ArrayView1};

/// Anything that maps an input row to an output row.
pub trait Predictor: Sync {
    fn predict(&self, x: ArrayView1<'_, f64>) -> Array1<f64>;

    /// Row-wise predictions; override when a batched path is faster.
    fn predict_batch(&self, xs: &Array2<f64>) -> Array2<f64> {
        let rows: Vec<Array1<f64>> = xs.rows().into_iter().map(|r| self.predict(r)).collect();
        let q = rows.first().map_or(0, |r| r.len());
        Array2::from_shape_fn((rows.len(), q), |(i, j)| rows[i][j])
    }
}

impl<F> Predictor for F
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64> + Sync,
{
    fn predict(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self(x)
    }
}

/// Wraps a scalar-valued function as a one-output predictor.
pub fn scalar<F>(f: F) -> impl Predictor
where
    F: Fn(ArrayView1<'_, f64>) -> f64 + Sync,
{
    move |x: ArrayView1<'_, f64>| Array1::from_elem(1, f(x))
}
