from ghyena.commands import bench, check, evaluate, gen_data, train
from ghyena.commands.deps import COMMON_ARGUMENTS
from ghyena.commands.router import CommandRouter

command_router = CommandRouter()

command_router.include_router(gen_data.router, common=COMMON_ARGUMENTS)
command_router.include_router(train.router, common=COMMON_ARGUMENTS)
command_router.include_router(evaluate.router, common=COMMON_ARGUMENTS)
command_router.include_router(bench.router, common=COMMON_ARGUMENTS)
command_router.include_router(check.router, common=COMMON_ARGUMENTS)
