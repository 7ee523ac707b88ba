"""Every cell of the reference dataset mapping table, transcribed by hand.

Rows are (dataset, source class as printed, expected target). The BDD100K
"Traffig sign" cell is a misprint and is checked as "traffic sign".
"""

from vrukit.ingest import SourceDataset

K, B, F = SourceDataset.KITTI, SourceDataset.BDD100K, SourceDataset.FLIR

CELLS = [
    (K, "Car", "Car"), (K, "Van", "Car"), (B, "Car", "Car"), (F, "Car", "Car"),
    (K, "Pedestrian", "Pedestrian"), (K, "Person_sitting", "Pedestrian"),
    (B, "Person", "Pedestrian"), (B, "rider", "Pedestrian"),
    (F, "Person", "Pedestrian"), (F, "people", "Pedestrian"), (F, "stroller", "Pedestrian"),
    (K, "Cyclist", "Cyclist"), (B, "Bike", "Cyclist"), (F, "Bike", "Cyclist"),
    (K, "Bus", "Bus"), (B, "Bus", "Bus"), (F, "Bus", "Bus"),
    (K, "Truck", "Truck"), (B, "truck", "Truck"), (F, "truck", "Truck"),
    (K, "Animal", "Animal"), (F, "Dog", "Animal"),
    (K, "Motorcycle", "Motorcycle"), (B, "Motor", "Motorcycle"), (F, "Motor", "Motorcycle"),
    (K, "Scooter", "Scooter"), (F, "Scooter", "Scooter"),
    (K, "Tram", "OtherVehicle"), (K, "Misc", "OtherVehicle"), (B, "Train", "OtherVehicle"),
    (F, "Train", "OtherVehicle"), (F, "other vehicle", "OtherVehicle"),
    (K, "Don't care", "Ignore"),
    (B, "traffic sign", "Ignore"), (B, "traffic light", "Ignore"),
    (F, "Skateboard", "Ignore"), (F, "light", "Ignore"), (F, "hydrant", "Ignore"), (F, "sign", "Ignore"),
]

# "N/A" cells: BDD100K has no source class for these targets.
NOT_AVAILABLE = [(B, "Animal"), (B, "Scooter")]

CLASS_ORDER = ["Car", "Pedestrian", "Cyclist", "Bus", "Truck", "Animal", "Motorcycle", "Scooter", "OtherVehicle"]
