//! Criterion benchmarks: codec throughput, secure-channel throughput, and
//! an end-to-end simulated hour.

use cnmm_bench::{steady_scenario, update_message};
use cnmm_cli::runner::run_scenario;
use cnmm_core::secure_channel::{protect, unprotect, ChannelConfig, ChannelKeys};
use cnmm_core::wire::{decode_message, encode_message};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn bench_codec(c: &mut Criterion) {
    let mut group = c.benchmark_group("wire");
    for records in [1usize, 16, 128] {
        let msg = update_message(records);
        let bytes = encode_message(&msg).unwrap();
        group.throughput(Throughput::Bytes(bytes.len() as u64));
        group.bench_with_input(BenchmarkId::new("encode", records), &msg, |b, msg| {
            b.iter(|| encode_message(msg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("decode", records), &bytes, |b, bytes| {
            b.iter(|| decode_message(bytes).unwrap())
        });
    }
    group.finish();
}

fn bench_secure_channel(c: &mut Criterion) {
    let keys = ChannelKeys::derive(1, 1);
    let cfg = ChannelConfig::default();
    let mut group = c.benchmark_group("secure_channel");
    for size in [64usize, 1024, 8192] {
        let plain: Vec<u8> = (0..size).map(|i| (i * 31 % 251) as u8).collect();
        let envelopes = protect(&plain, &keys, &cfg).unwrap();
        group.throughput(Throughput::Bytes(size as u64));
        group.bench_with_input(BenchmarkId::new("protect", size), &plain, |b, plain| {
            b.iter(|| protect(plain, &keys, &cfg).unwrap())
        });
        group.bench_with_input(
            BenchmarkId::new("unprotect", size),
            &envelopes,
            |b, envelopes| b.iter(|| unprotect(envelopes, &keys, &cfg).unwrap()),
        );
    }
    group.finish();
}

fn bench_scenario(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario");
    group.sample_size(10);
    for agents in [10u64, 50] {
        let scenario = steady_scenario(agents);
        group.bench_with_input(
            BenchmarkId::new("quiet_hour", agents),
            &scenario,
            |b, scenario| b.iter(|| run_scenario(scenario).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_codec, bench_secure_channel, bench_scenario);
criterion_main!(benches);
