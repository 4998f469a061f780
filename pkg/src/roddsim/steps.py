## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

from enum import Enum


class Steps(Enum):
    # GEOMETRY
    ValidateNetworkParams = "validating network parameters"
    PlaceNodes = "placing nodes in the region"
    DrawFading = "drawing fading gains and phases"
    FindNeighbors = "finding the neighbor sets"
    WriteRealization = "writing the network realization"

    # PHY
    CheckCodebookBudget = "checking the codebook memory budget"
    GenerateCodebook = "generating a signature codebook"
    SelectOffSlots = "selecting the receiver's off-slots"
    SuperposeSignals = "superposing the received signals"
    ValidateInstance = "validating the observation instance"

    # DENOISER
    TabulateDensity = "tabulating the real-part density"
    ValidatePriorMass = "validating the prior normalization"
    BuildTables = "building the interpolation tables"

    # DECODER
    PrepareFactorGraph = "preparing the factor graph"
    ClampVariance = "clamping the residual variance"
    RunIterations = "running the message-passing iterations"
    DecideMessages = "deciding the message indices"

    # BASELINES
    IntegrateCharacteristic = "integrating the interference characteristic function"
    CheckImaginaryResidue = "checking the imaginary residue of the integral"
    SimulateAccess = "simulating random access frames"

    # HARNESS
    LoadConfig = "loading the sweep configuration"
    RunTrial = "running one trial"
    AggregateRows = "aggregating result rows"
    WriteResults = "writing the result file"
