use synchro::generator::preset;
use synchro::metrics::MetricsReport;
use synchro::pipeline::{default_mode, plan};
use synchro::simulator::{occupancy_check, run, EmissionPolicy, SimConfig, Strategy};

fn main() {
    let inst = preset("surveillance-3x3").unwrap();
    let (s, _) = plan(&inst, default_mode(&inst), 300.0).unwrap();
    for emission in [EmissionPolicy::RandomPhase, EmissionPolicy::PeriodStart] {
        let traces: Vec<_> = (0..10)
            .map(|seed| {
                let mut c = SimConfig::new(15000.0, Strategy::Alw, seed);
                c.emission = emission;
                run(&inst, &s, &c).unwrap()
            })
            .collect();
        assert!(traces.iter().all(occupancy_check));
        let r = MetricsReport::from_traces(&traces);
        println!(
            "{emission:?} bt={:?} at={} st={} ct={} ev={}",
            r.avg_broadcast_time,
            r.max_abandoned_time,
            r.max_starvation_time,
            r.avg_completed_tours,
            traces[0].events.len()
        );
    }
}
