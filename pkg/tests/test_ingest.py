from collections import Counter
from datetime import datetime

import pytest

from fleetcoop.ingest import (
    REQUIRED,
    BoundingBox,
    MissingColumn,
    MissingZone,
    NoNodesAvailable,
    UnreadableFile,
    nearest_node,
    parse_trip_csv,
    snap_to_nodes,
    zone_classification,
)
from fleetcoop.scenario import Node, Request, TransportNetwork

BOX = BoundingBox(40.70, -74.02, 40.80, -73.93)
HEADER = ",".join(REQUIRED)


def write(tmp_path, rows, header=HEADER, name="trips.csv"):
    p = tmp_path / name
    p.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return p


def row(pick="2016-03-01 06:00:00", drop="2016-03-01 06:10:00", plat=40.758, plon=-73.9855,
        dlat=40.749, dlon=-73.974, dist="2.0", pax="1"):
    return f"{pick},{drop},{plat},{plon},{dlat},{dlon},{dist},{pax}"


def test_valid_rows_are_kept(tmp_path):
    recs, rep = parse_trip_csv(write(tmp_path, [row(), row(pax="2"), row(dist="0")]), BOX)
    assert len(recs) == 3 and rep.rejected == 0 and rep.accepted == 3 and rep.total_rows == 3
    assert [r.row for r in recs] == [1, 2, 3]
    assert recs[1].passenger_count == 2


@pytest.mark.parametrize("bad,reason", [
    (row(drop="2016-03-01 05:59:00"), "NonmonotoneTime"),
    (row(plat=41.5), "OutOfBounds"),
    (row(dlon=-75.0), "OutOfBounds"),
    (row(pax="0"), "InvalidPassengerCount"),
    (row(pax="1.5"), "InvalidPassengerCount"),
    (row(dist="-0.1"), "NegativeDistance"),
    (row(dist="2,5"), "MalformedRow"),
    (row(pick="yesterday"), "MalformedRow"),
    ("2016-03-01 06:00:00,2016-03-01 06:10:00,40.75", "MalformedRow"),
])
def test_bad_rows_are_counted_not_raised(tmp_path, bad, reason):
    recs, rep = parse_trip_csv(write(tmp_path, [row(), bad]), BOX)
    assert len(recs) == 1
    assert rep.reasons == Counter({reason: 1})
    assert rep.rows == [(2, reason)]
    assert reason in rep.summary()


def test_column_map_and_distance_scale(tmp_path):
    header = HEADER.replace("trip_distance_km", "trip_distance").replace("pickup_lat", "lat0")
    recs, _ = parse_trip_csv(write(tmp_path, [row(dist="1.0")], header=header), BOX,
                             column_map={"trip_distance_km": "trip_distance", "pickup_lat": "lat0"},
                             distance_scale=1.609344)
    assert recs[0].trip_distance_km == pytest.approx(1.609344)


def test_missing_column(tmp_path):
    header = HEADER.replace(",passenger_count", "")
    with pytest.raises(MissingColumn, match="passenger_count"):
        parse_trip_csv(write(tmp_path, [], header=header), BOX)


def test_unreadable_file(tmp_path):
    with pytest.raises(UnreadableFile):
        parse_trip_csv(tmp_path / "absent.csv", BOX)
    p = tmp_path / "latin.csv"
    p.write_bytes((HEADER + "\n").encode() + "caf\xe9".encode("latin-1") + b"\n")
    with pytest.raises(UnreadableFile):
        parse_trip_csv(p, BOX)


def transport(nodes):
    return TransportNetwork(tuple(nodes), ())


def test_exact_coordinates_at_window_start(case_b, tmp_path):
    recs, _ = parse_trip_csv(write(tmp_path, [row(plat=40.7580, plon=-73.9855, dlat=40.7490, dlon=-73.9740)]), BOX)
    out = snap_to_nodes(recs, case_b.transport, (datetime(2016, 3, 1, 6), datetime(2016, 3, 1, 10)), 15)
    assert list(out) == [Request(1, 1, 5, 0, 1)]


def test_floor_quantisation(case_b, tmp_path):
    recs, _ = parse_trip_csv(write(tmp_path, [row(pick="2016-03-01 06:29:59", drop="2016-03-01 06:40:00")]), BOX)
    out = snap_to_nodes(recs, case_b.transport, (datetime(2016, 3, 1, 6), datetime(2016, 3, 1, 10)), 15)
    assert out[0].earliest_pickup_step == 1


def test_equidistant_point_goes_to_lower_id():
    t = transport([Node(5, lat=0.0, lon=1.0), Node(2, lat=0.0, lon=-1.0)])
    assert nearest_node(t, 0.0, 0.0) == 2


def test_sample_file(case_b, data_dir):
    recs, rep = parse_trip_csv(data_dir / "trips_sample.csv", BOX)
    assert rep.total_rows == 10 and rep.rejected == 0
    out = snap_to_nodes(recs, case_b.transport, (datetime(2016, 3, 1, 6), datetime(2016, 3, 1, 10)), 15)
    assert [(r.origin, r.destination, r.earliest_pickup_step, r.passengers) for r in out] == [
        (4, 3, 0, 1), (8, 2, 5, 1), (6, 7, 11, 3), (11, 5, 15, 1)]
    assert [r.id for r in out] == [1, 2, 3, 4]
    assert rep.accepted + rep.rejected == rep.total_rows
    assert len(out) + out.dropped_total == rep.accepted
    assert out.dropped == Counter({"OutsideWindow": 6})


def test_same_node_trips_are_dropped(case_b, tmp_path):
    recs, _ = parse_trip_csv(write(tmp_path, [row(plat=40.7580, plon=-73.9855, dlat=40.7581, dlon=-73.9856)]), BOX)
    out = snap_to_nodes(recs, case_b.transport, (datetime(2016, 3, 1, 6), datetime(2016, 3, 1, 10)), 15)
    assert list(out) == [] and out.dropped == Counter({"SameNode": 1})


def test_no_geolocated_nodes():
    t = transport([Node(1), Node(2)])
    with pytest.raises(NoNodesAvailable):
        nearest_node(t, 40.0, -73.0)
    with pytest.raises(NoNodesAvailable):
        snap_to_nodes([], t, (datetime(2016, 1, 1), datetime(2016, 1, 2)), 15)


def test_zone_classification(case_b):
    zones = zone_classification(case_b.transport)
    assert zones[1] == "commercial" and zones[4] == "residential" and zones[12] == "industrial"
    with pytest.raises(MissingZone):
        zone_classification(transport([Node(1, zone="commercial"), Node(2)]))
    with pytest.raises(MissingZone):
        zone_classification(transport([Node(1, zone="harbour")]))
