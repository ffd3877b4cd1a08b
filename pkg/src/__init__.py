# Optomechanical Fock-state preparation
