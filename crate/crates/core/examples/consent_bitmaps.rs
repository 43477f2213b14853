//! Build consent snapshots, store them on disk and look consents up as of a time.
//!
//! `cargo run --example consent_bitmaps`

use chrono::{Duration, TimeZone, Utc};
use maskgate::consent::{build_snapshots, has_user_consent, snapshot_gc, ConsentRecord, FsStore, SnapshotStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = FsStore::open(dir.path())?;
    let monday = Utc.with_ymd_and_hms(2024, 3, 4, 0, 0, 0).unwrap();

    // Ten subjects: three opted in to `news`, eight to `ads`.
    let records: Vec<_> = (0..10)
        .flat_map(|s| [ConsentRecord::new(s, "news", s < 3), ConsentRecord::new(s, "ads", s < 8)])
        .collect();
    for day in 0..3 {
        let mut recs = records.clone();
        // Subject 9 opts in to ads on the second day.
        if day >= 1 {
            recs.retain(|r| !(r.subject_id == 9 && r.consent == "ads"));
            recs.push(ConsentRecord::new(9, "ads", true));
        }
        for snap in build_snapshots(&recs, monday + Duration::days(day))? {
            if day == 0 {
                println!(
                    "{:<5} polarity={:?} stored={} of {}",
                    snap.consent_name,
                    snap.polarity,
                    snap.bitmap.len(),
                    snap.universe_size
                );
            }
            store.save(&snap)?;
        }
    }

    for (label, at) in [("monday noon", monday + Duration::hours(12)), ("tuesday noon", monday + Duration::hours(36))] {
        let answer = has_user_consent("ads", 9, at, &store)?;
        println!("subject 9 consents to ads at {label}: {answer}");
    }
    println!(
        "subject 1, news and ads: {}",
        has_user_consent("news,ads", 1, monday + Duration::days(2), &store)?
    );
    println!(
        "before the first snapshot: {}",
        has_user_consent("ads", 1, monday - Duration::days(1), &store).unwrap_err()
    );

    let removed = snapshot_gc(&store, Duration::hours(30), monday + Duration::days(2))?;
    println!("\ngc removed {} snapshot(s); ads now has {:?}", removed.len(), store.list("ads")?);
    Ok(())
}
