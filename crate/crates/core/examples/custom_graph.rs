//! Building communication graphs and checking whether the observer can run on them.

use leader_consensus::topology::{Digraph, Edge};

fn describe(name: &str, g: &Digraph) {
    let c = g.coupling_matrices();
    println!(
        "{name:<26} min eig H = {:>6.4}  connectivity {}",
        c.h_min_eigenvalue(),
        g.check_leader_connectivity()
    );
}

fn main() -> leader_consensus::Result<()> {
    describe("chain, leader at 1", &Digraph::rooted_chain(6)?);
    describe("chain, leader at 1 and 4", &Digraph::reference_network());

    // star: the leader talks to follower 1, which talks to everyone else both ways
    let mut edges = vec![Edge::unit(0, 1)];
    for j in 2..=5 {
        edges.push(Edge::unit(1, j));
        edges.push(Edge::unit(j, 1));
    }
    describe("star around follower 1", &Digraph::new(6, edges)?);

    describe(
        "one-way chain",
        &Digraph::new(4, [Edge::unit(0, 1), Edge::unit(1, 2), Edge::unit(2, 3)])?,
    );
    describe(
        "unreachable follower",
        &Digraph::new(4, [Edge::unit(0, 1), Edge::unit(1, 2), Edge::unit(2, 1)])?,
    );

    match Digraph::new(3, [Edge::unit(1, 0)]) {
        Ok(_) => unreachable!(),
        Err(e) => println!("edge into the leader: {e}"),
    }
    Ok(())
}
