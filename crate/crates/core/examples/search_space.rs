//! Size of the symbolic search space for a Hamiltonian library versus
//! learning every right-hand-side component directly.
//!
//! ```text
//! cargo run --example search_space
//! ```

use phsysid::basis::{bsi_library_size, build_polynomial_library, library_size};

fn main() {
    println!("{:>3} {:>3} {:>12} {:>12}", "d", "n", "hamiltonian", "direct");
    for d in [2, 4, 6] {
        for n in 2..=5 {
            println!("{d:>3} {n:>3} {:>12} {:>12}", library_size(d, n), bsi_library_size(d, n));
        }
    }
    let lib = build_polynomial_library(4, 4, false).with_names(&["q1", "q2", "p1", "p2"]);
    println!("\nquartic library in four variables has {} terms:", lib.terms.len());
    let labels: Vec<String> = (0..lib.terms.len()).map(|i| lib.term_label(i)).collect();
    println!("{}", labels.join(" "));
}
