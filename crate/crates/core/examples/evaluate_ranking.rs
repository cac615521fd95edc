//! Full-ranking evaluation on a hand-made table.
//!
//!     cargo run --example evaluate_ranking

use ndarray::array;
use rec_unlearn::eval::{evaluate, ndcg_at_n, rank_items, recall_at_n};
use rec_unlearn::{Dataset, EmbeddingTable, Interaction};

fn main() -> rec_unlearn::Result<()> {
    // Two users, four items, one latent dimension.
    let table = EmbeddingTable::new(array![[1.0], [-1.0]], array![[0.1], [0.9], [0.5], [0.5]])?;
    let train = Dataset::from_interactions(2, 4, vec![Interaction::new(0, 1)])?;
    let test = Dataset::from_interactions(2, 4, vec![Interaction::new(0, 3), Interaction::new(1, 0)])?;

    // Item 1 is a training positive and is skipped; items 2 and 3 tie and
    // keep index order.
    let ranked = rank_items(&table, 0, train.user_items(0))?;
    println!("user 0 ranking: {ranked:?}");
    println!(
        "user 0: Recall@1 {:?}, Recall@2 {:?}, NDCG@2 {:.4}",
        recall_at_n(&ranked, test.user_items(0), 1),
        recall_at_n(&ranked, test.user_items(0), 2),
        ndcg_at_n(&ranked, test.user_items(0), 2).unwrap()
    );

    let metrics = evaluate(&table, &train, &test, &[1, 2])?;
    print!("{}", metrics.to_tsv());
    Ok(())
}
