//! Sessionize a handful of events and print the handcrafted feature vector of each traveler.

use retarget::model::{
    build_histories, handcrafted_features, ActivityEvent, DEFAULT_GAP_MS, FEATURE_NAMES, MS_PER_HOUR,
};

fn main() -> retarget::Result<()> {
    let h = MS_PER_HOUR;
    let events = vec![
        ActivityEvent::search("ana", 0, Some("lisbon")),
        ActivityEvent::view("ana", 60_000, "l1", Some("lisbon")),
        ActivityEvent::click("ana", 120_000, "l1", Some("lisbon")),
        ActivityEvent::view("ana", 5 * h, "l2", Some("porto")),
        ActivityEvent::view("bo", 2 * h, "l3", Some("lisbon")),
        ActivityEvent::view("bo", 2 * h + 30_000, "l1", Some("lisbon")),
    ];
    for history in build_histories(&events, DEFAULT_GAP_MS)? {
        println!(
            "{}: {} sessions, listings {:?}",
            history.traveler_id,
            history.sessions.len(),
            history.listing_sequence()
        );
        for (name, value) in FEATURE_NAMES.iter().zip(handcrafted_features(&history)) {
            println!("  {name:<26} {value:.3}");
        }
    }
    Ok(())
}
