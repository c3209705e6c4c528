from saturn_mousehunter_obstacle_engine import main

main()
