from svct.commands import evaluation, operators, reconstruct, training

COMMAND_MODULES = (operators, reconstruct, training, evaluation)
