//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use super::{lu, Mat};
use crate::scalar::Real;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [13/13] approximant meets double-precision accuracy.
const THETA13: f64 = 5.371920351148152;

pub fn expm<T: Real>(a: &Mat<T>) -> Mat<T> {
    assert!(a.is_square(), "expm of non-square matrix");
    let n = a.rows();
    if n == 0 {
        return a.clone();
    }
    let norm = a.norm1().as_f64();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a.scale(T::lit(2f64.powi(-squarings)));

    let b: Vec<T> = PADE13.iter().map(|c| T::lit(*c)).collect();
    let id = Mat::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let u_inner = a6
        .matmul(&a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9])))
        .add(&a6.scale(b[7]))
        .add(&a4.scale(b[5]))
        .add(&a2.scale(b[3]))
        .add(&id.scale(b[1]));
    let u = a.matmul(&u_inner);
    let v = a6
        .matmul(&a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8])))
        .add(&a6.scale(b[6]))
        .add(&a4.scale(b[4]))
        .add(&a2.scale(b[2]))
        .add(&id.scale(b[0]));

    let mut r = lu::solve(&v.sub(&u), &v.add(&u))
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    r
}
