//! Data ingestion tour: parse LIBSVM text, split train/test, partition into
//! shards, standardize, and round-trip the binary cache.

use mdd_learn::data::{
    parse_libsvm_str, partition, read_cache, split_train_test, standardize, to_libsvm_string,
    write_cache,
};

fn main() {
    let text = "\
1.5 1:0.5 3:2.0
-0.7 2:1.25
0.9 1:-1.0 2:0.5 3:0.25
2.1 3:1.75
-1.3 1:0.4 2:-0.9
0.2 2:2.5 3:-0.5
";
    let ds = parse_libsvm_str(text).expect("valid LIBSVM text");
    println!("parsed {} samples with {} features", ds.n_samples(), ds.dim());

    let (train, test) = split_train_test(&ds, 0.7, 42).unwrap();
    println!("split: {} train / {} test", train.n_samples(), test.n_samples());

    let part = partition(&train, 2, 42).unwrap();
    for (i, shard) in part.shards.iter().enumerate() {
        println!("shard {i}: rows {shard:?}");
    }

    let (train_std, _, stats) = standardize(&train, &test).unwrap();
    println!(
        "standardized: column means {:?}, population stds {:?}",
        stats.mean.to_vec(),
        stats.std_dev.to_vec()
    );
    println!(
        "first standardized row: {:?}",
        train_std.features().row(0).to_vec()
    );

    // binary cache round-trip
    let mut cache = Vec::new();
    write_cache(&mut cache, &ds).unwrap();
    let back = read_cache(cache.as_slice()).unwrap();
    assert_eq!(ds, back);
    println!("cache round-trip ok ({} bytes)", cache.len());

    // dense text serialization reparses to the same dataset
    let reparsed = parse_libsvm_str(&to_libsvm_string(&ds)).unwrap();
    assert_eq!(ds, reparsed);
    println!("text round-trip ok");
}
