// Scratch probe for fixture design margins (not shipped behavior).
use chrono::{Datelike, Days, NaiveDate};
use psps_core::dispatch::{dispatch_fixed, statuses_from_plan};
use psps_core::fixtures::*;
use psps_core::metrics::*;
use psps_core::net::LineId;
use psps_core::threshold::{compute_percentile, plan_threshold};

fn year_rasters(year: i32) -> Vec<psps_core::raster::RiskRaster> {
    let mut out = Vec::new();
    let mut day = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
    while day.year() == year {
        out.push(cats14_raster(day));
        day = day.checked_add_days(Days::new(1)).unwrap();
    }
    out
}

fn main() {
    let net = cats14_network();
    let train = year_rasters(2019);
    let study = year_rasters(2020);
    let pop = pixel_population(&net, &train).unwrap();
    let thr = compute_high_risk_threshold(&pop, "2019").unwrap();
    println!("training: mean={:.2} std={:.2} threshold={:.2}", thr.mean_r, thr.std_r, thr.threshold);

    let table = build_table(&net, &study, &thr).unwrap();

    // Pixel counts per line.
    let traces = trace_all_lines(&net, &study[0]).unwrap();
    for (line, tr) in net.lines.iter().zip(&traces) {
        let pr = psps_core::raster::pixel_risks(tr, &study[220]).unwrap();
        println!(
            "line {:2} {}-{}: |cells|={:2} |burnable|={:2}",
            line.id.0, line.from_bus.0, line.to_bus.0, tr.pixels.len(), pr.pixel_count
        );
    }

    // Find one extreme, one elevated day.
    let mut extreme_day = None;
    let mut elevated_day = None;
    let mut d = NaiveDate::from_ymd_opt(2020, 8, 1).unwrap();
    while d.year() == 2020 && (extreme_day.is_none() || elevated_day.is_none()) {
        match day_type(d) {
            DayType::Extreme if extreme_day.is_none() => extreme_day = Some(d),
            DayType::Elevated if elevated_day.is_none() => elevated_day = Some(d),
            _ => {}
        }
        d = d.checked_add_days(Days::new(1)).unwrap();
    }
    let (xd, ed) = (extreme_day.unwrap(), elevated_day.unwrap());
    println!("extreme day {xd}, elevated day {ed}");

    for metric in ALL_METRICS {
        let pct = compute_percentile(&table, metric, 95.0).unwrap();
        println!("--- {metric}: p95 = {:.2}", pct.value);
        for (label, day) in [("extreme", xd), ("elevated", ed)] {
            let plan = plan_threshold(&table, metric, day, &pct).unwrap();
            let off: Vec<u32> = plan.off_lines.iter().map(|l| l.0).collect();
            println!("  {label} {day}: off={off:?} residual={:.1}", plan.residual_risk);
        }
        // Extreme-day stats across the year: how often are the three
        // pass feeders all cut; how often foothills survive.
        let mut n_ext = 0;
        let mut feeders_all_cut = 0;
        let mut foothill_cut_total = 0usize;
        let mut day = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        while day.year() == 2020 {
            if day_type(day) == DayType::Extreme {
                n_ext += 1;
                let plan = plan_threshold(&table, metric, day, &pct).unwrap();
                let cut = |id: u32| plan.off_lines.contains(&LineId(id));
                if cut(11) && cut(12) && cut(13) {
                    feeders_all_cut += 1;
                }
                foothill_cut_total += [6u32, 7, 8, 9].iter().filter(|&&l| cut(l)).count();
            }
            day = day.checked_add_days(chrono::Days::new(1)).unwrap();
        }
        println!(
            "  extreme days: {n_ext}, all-3-feeders-cut: {feeders_all_cut}, avg foothills cut: {:.2}",
            foothill_cut_total as f64 / n_ext as f64
        );
        // Risk values on the sample extreme day per class.
        let risks = table.day_risks(xd, metric).unwrap();
        let r = |id: u32| risks.iter().find(|(l, _)| l.0 == id).unwrap().1;
        println!(
            "  sample extreme: sac19={:.0} sac20={:.0} feeders=({:.0},{:.0},{:.0}) chainhalf10={:.0} foothills=({:.0},{:.0},{:.0},{:.0}) spine14={:.0} stub3={:.0}",
            r(19), r(20), r(11), r(12), r(13), r(10), r(6), r(7), r(8), r(9), r(14), r(3)
        );
    }

    // Dispatch sanity: peak-hour all-on shed, and threshold-plan shed on the extreme day.
    let demand_csv = cats14_demand_csv(2020);
    let demand = psps_core::net::parse_demand(&demand_csv, &net).unwrap();
    let peak_day = NaiveDate::from_ymd_opt(2020, 7, 15).unwrap();
    let dm = demand.bus_demand_mw(&net, peak_day, 17);
    let all_on = dispatch_fixed(&net, &vec![true; 20], &dm, peak_day, 17).unwrap();
    println!("all-on peak shed: {:.3} MW (demand {:.1})", all_on.total_shed_mw, dm.iter().sum::<f64>());

    let pct = compute_percentile(&table, MetricKind::Ma, 95.0).unwrap();
    let plan = plan_threshold(&table, MetricKind::Ma, xd, &pct).unwrap();
    let statuses = statuses_from_plan(&net, &plan).unwrap();
    let dmx = demand.bus_demand_mw(&net, xd, 17);
    let cut = dispatch_fixed(&net, &statuses, &dmx, xd, 17).unwrap();
    println!("threshold-plan extreme-day peak shed: {:.1} MW", cut.total_shed_mw);
}
