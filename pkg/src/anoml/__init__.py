"""anoml: a desk-scale, reconfigurable IoT anomaly-detection pipeline.

Modules:
    wire        fixed-width sensor message codec (text and BLE buffer)
    simnet      discrete-event transport simulation across edge/fog/cloud
    codegen     declarative edge-node spec -> transmitter/receiver bundle
    dataset     labeled time-series loading, synthesis, splitting
    preprocess  sliding windows plus the scaler/reducer menu
    detect      isolation forest, one-class SVM, dense autoencoder
    metrics     confusion metrics (normal-as-positive) and rank AUC
    artifact    binary model container with CRC-32 integrity
    service     HTTP inference service
    scenario    detection-placement scenarios over the simulator
    cli         the end-to-end command line
"""

__version__ = "0.1.0"
