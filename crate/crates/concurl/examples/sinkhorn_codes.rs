//! Balanced soft assignments from raw similarity scores. The balancing
//! rounds push every row to sum to 1 and every column to sum to B/K, so no
//! prototype can swallow the whole batch.

use concurl::objectives::{hard_assign, sinkhorn_from_scores, SinkhornConfig};
use concurl::{Result, Tensor};

fn column_sums(q: &Tensor) -> Vec<f64> {
    let (b, k) = q.dims2().unwrap();
    let mut sums = vec![0.0; k];
    for i in 0..b {
        for (j, s) in sums.iter_mut().enumerate() {
            *s += q.at2(i, j);
        }
    }
    sums
}

fn main() -> Result<()> {
    // Six points, three prototypes; the scores deliberately favor the first
    // prototype for almost everyone.
    let scores = Tensor::from_rows(&[
        vec![0.9, 0.1, 0.0],
        vec![0.8, 0.0, 0.2],
        vec![0.7, 0.3, 0.1],
        vec![0.9, 0.2, 0.1],
        vec![0.1, 0.8, 0.3],
        vec![0.2, 0.1, 0.9],
    ])?;

    let greedy: Vec<usize> = scores.argmax_rows()?;
    println!("greedy argmax of the raw scores: {greedy:?} (prototype 0 takes 4 of 6)");

    let training = SinkhornConfig::default();
    let codes = sinkhorn_from_scores(&scores, &training)?;
    println!("\nafter {} balancing rounds:", training.num_iters);
    println!("hard assignments: {:?}", hard_assign(&codes));
    println!("column sums: {:?} (target: 2 each)", column_sums(&codes.q));

    // Running to convergence makes the marginals exact to one part in 1e10.
    let converged = SinkhornConfig::converged();
    let codes = sinkhorn_from_scores(&scores, &converged)?;
    println!("\nat convergence:");
    println!("hard assignments: {:?}", hard_assign(&codes));
    println!("column sums: {:?}", column_sums(&codes.q));
    for i in 0..6 {
        let row: Vec<f64> = (0..3).map(|j| codes.q.at2(i, j)).collect();
        println!("q[{i}] = [{:.4}, {:.4}, {:.4}]", row[0], row[1], row[2]);
    }
    Ok(())
}
