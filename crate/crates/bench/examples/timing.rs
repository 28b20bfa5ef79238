use std::time::Instant;

use medest_bench::synthetic_population;
use medest_core::enumeration::exact_sampling_distribution;

fn main() {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().unwrap())
        .collect();
    let (size, n, workers) = (args[0], args[1], args[2]);
    let pop = synthetic_population(size);
    let start = Instant::now();
    let ds = exact_sampling_distribution(&pop, n, workers).unwrap();
    println!("{:?} in {:?}", ds, start.elapsed());
}
